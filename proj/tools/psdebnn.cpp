// SPDX-License-Identifier: Apache-2.0
//
// psdebnn CLI: train / eval / sample-paths / kl-diagnose / gen-data.

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "psdebnn/config.hpp"
#include "psdebnn/errors.hpp"

namespace fs = std::filesystem;
using namespace psdebnn;

namespace {

std::string data_dir() {
  const char* env = std::getenv("PSDEBNN_DATA_DIR");
  return env ? std::string(env) : std::string(".");
}

std::string resolve_data_path(const std::string& p) {
  if (p.empty() || fs::path(p).is_absolute() || fs::exists(p)) return p;
  const fs::path under_dir = fs::path(data_dir()) / p;
  return fs::exists(under_dir) ? under_dir.string() : p;
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
}

std::vector<std::uint64_t> parse_seed_list(const std::string& csv) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(csv);
  std::string cell;
  while (std::getline(ss, cell, ','))
    if (!cell.empty()) seeds.push_back(std::stoull(cell));
  if (seeds.empty()) throw ConfigError("empty seed list");
  return seeds;
}

int cmd_train(const std::string& config_path, long long seed_override,
              int threads_override, std::string out_dir) {
  RunConfig cfg = load_run_config(config_path);
  if (seed_override >= 0)
    cfg.train.seed = static_cast<std::uint64_t>(seed_override);
  if (threads_override > 0)
    cfg.train.threads = static_cast<std::size_t>(threads_override);
  cfg.dataset.images_path = resolve_data_path(cfg.dataset.images_path);
  cfg.dataset.labels_path = resolve_data_path(cfg.dataset.labels_path);
  cfg.dataset.csv_path = resolve_data_path(cfg.dataset.csv_path);

  if (out_dir.empty()) out_dir = "runs/" + cfg.name;
  fs::create_directories(out_dir);
  // resolved snapshot: rerunning from it reproduces the run
  write_file(fs::path(out_dir) / "config.json", serialize_run_config(cfg));

  const Dataset ds = build_dataset(cfg.dataset);
  const Model model = build_model(cfg, ds.dim(), ds.num_classes);
  ParamStore store;
  model.init_params(store, cfg.train.seed);

  std::cout << "training '" << cfg.name << "': d_w=" << model.dw()
            << " d_h=" << model.dh() << " r_s=" << cfg.stochasticity_ratio()
            << " kappa=" << cfg.effective_kappa() << "\n";

  const TrainResult result =
      train(model, store, ds, build_train_config(cfg),
            [](const TrainLogRow& row) {
              std::cout << "epoch " << row.epoch << " elbo=" << row.elbo
                        << " ll=" << row.log_lik << " kl=" << row.kl
                        << " train_acc=" << row.train_accuracy
                        << " val_acc=" << row.val_accuracy
                        << " val_ece=" << row.val_ece << " (" << row.epoch_secs
                        << "s)"
                        << (row.numerics_event ? " [numerics event]" : "")
                        << "\n";
            });

  {
    std::ofstream os(fs::path(out_dir) / "log.csv");
    write_train_log_csv(os, result.log);
  }
  save_checkpoint((fs::path(out_dir) / "checkpoint.bin").string(), model,
                  result.best_params);

  if (!ds.indices_of(Split::kTest).empty()) {
    const EvalReport rep = run_eval(model, result.best_params, ds, cfg.eval);
    std::ofstream os(fs::path(out_dir) / "metrics.csv");
    write_eval_report_csv(os, rep);
    std::cout << "test accuracy=" << rep.accuracy << " ece=" << rep.ece
              << " ood_auc=" << rep.roc_auc << "\n";
  }
  std::cout << "best val accuracy " << result.best_metric << " at epoch "
            << result.best_epoch << "; artifacts in " << out_dir << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint_path, std::string config_path,
             const std::string& ood, long long num_samples,
             long long seed_override, std::string out_dir) {
  const Checkpoint ck = load_checkpoint(checkpoint_path);
  if (config_path.empty()) {
    const fs::path sibling =
        fs::path(checkpoint_path).parent_path() / "config.json";
    if (!fs::exists(sibling))
      throw ConfigError(
          "no --config given and no config.json next to the checkpoint");
    config_path = sibling.string();
  }
  RunConfig cfg = load_run_config(config_path);
  cfg.dataset.images_path = resolve_data_path(cfg.dataset.images_path);
  cfg.dataset.labels_path = resolve_data_path(cfg.dataset.labels_path);
  cfg.dataset.csv_path = resolve_data_path(cfg.dataset.csv_path);
  if (!ood.empty()) cfg.eval.ood = ood;
  if (num_samples > 0)
    cfg.eval.num_posterior_samples = static_cast<std::size_t>(num_samples);
  if (seed_override >= 0)
    cfg.eval.seed = static_cast<std::uint64_t>(seed_override);

  const Dataset ds = build_dataset(cfg.dataset);
  const Model model(ck.model, ck.schedule, ck.sigma);
  const EvalReport rep = run_eval(model, ck.params, ds, cfg.eval);

  std::cout << "accuracy=" << rep.accuracy << " ece=" << rep.ece
            << " mean_entropy_id=" << rep.mean_entropy_id
            << " mean_entropy_ood=" << rep.mean_entropy_ood
            << " roc_auc=" << rep.roc_auc
            << " inference_secs=" << rep.inference_secs
            << " brownian_draws=" << rep.brownian_draws << "\n";

  if (out_dir.empty()) out_dir = ".";
  fs::create_directories(out_dir);
  {
    std::ofstream os(fs::path(out_dir) / "metrics.csv");
    write_eval_report_csv(os, rep);
  }
  {
    std::ofstream os(fs::path(out_dir) / "entropy_hist.csv");
    write_entropy_histogram_csv(os, rep.id_entropies, rep.ood_entropies,
                                cfg.eval.ece_bins);
  }
  {
    std::ofstream os(fs::path(out_dir) / "roc.csv");
    os << "fpr,tpr\n";
    for (const auto& p : rep.roc_points) os << p.fpr << "," << p.tpr << "\n";
  }
  return 0;
}

int cmd_sample_paths(const std::string& preset, const std::string& config_path,
                     const std::string& seeds_csv, std::string out_dir) {
  PathsConfig cfg;
  if (!config_path.empty()) {
    std::ifstream is(config_path);
    if (!is) throw ConfigError("cannot open '" + config_path + "'");
    std::stringstream ss;
    ss << is.rdbuf();
    cfg = parse_paths_config(ss.str());
  } else if (!preset.empty()) {
    cfg = paths_config_from_preset(preset);
  } else {
    throw ConfigError("sample-paths needs --preset or --config");
  }
  if (out_dir.empty()) out_dir = "paths";
  fs::create_directories(out_dir);
  for (const std::uint64_t seed : parse_seed_list(seeds_csv)) {
    const PathRecord rec = run_sample_path(cfg, seed);
    const fs::path file =
        fs::path(out_dir) / ("paths_seed" + std::to_string(seed) + ".csv");
    std::ofstream os(file);
    rec.write_csv(os);
    std::cout << "wrote " << file.string() << "\n";
  }
  return 0;
}

int cmd_kl_diagnose(double sigma_q, double sigma_p, double drift_gap,
                    const std::string& steps_csv, const std::string& out_file) {
  std::vector<std::size_t> steps;
  if (steps_csv.empty()) {
    for (std::size_t n = 2; n <= (1u << 14); n *= 2) steps.push_back(n);
  } else {
    std::stringstream ss(steps_csv);
    std::string cell;
    while (std::getline(ss, cell, ','))
      if (!cell.empty()) steps.push_back(std::stoull(cell));
  }
  const auto rows = kl_diagnose(
      sigma_q, sigma_p, [=](double, double) { return drift_gap; },
      [](double, double) { return 0.0; }, steps);

  std::cout << "n,kl,kl_per_step\n";
  for (const auto& r : rows)
    std::cout << r.num_steps << "," << r.kl << "," << r.kl_per_step << "\n";
  if (!out_file.empty()) {
    std::ofstream os(out_file);
    os << "n,kl,kl_per_step\n";
    const auto prev = os.precision(12);
    for (const auto& r : rows)
      os << r.num_steps << "," << r.kl << "," << r.kl_per_step << "\n";
    os.precision(prev);
  }
  return 0;
}

int cmd_gen_data(const std::string& kind, std::size_t n,
                 std::size_t n_per_class, double noise_std, double r1,
                 double r2, double r3, std::size_t dx,
                 const std::string& ood_kind, const std::string& images,
                 const std::string& labels, std::size_t subset,
                 std::uint64_t seed, std::string out_file) {
  Dataset ds;
  if (kind == "two_moons") {
    ds = gen_two_moons(n, noise_std, seed);
  } else if (kind == "annulus") {
    ds = gen_annulus(n_per_class, r1, r2, r3, seed, dx);
  } else if (kind == "ood") {
    ds = gen_ood(n, dx, ood_kind_from_string(ood_kind), seed);
  } else if (kind == "mnist") {
    ds = load_mnist_idx(resolve_data_path(images), resolve_data_path(labels),
                        subset, seed);
  } else {
    throw ConfigError("gen-data: unknown kind '" + kind + "'");
  }
  if (out_file.empty())
    out_file = (fs::path(data_dir()) / (kind + ".csv")).string();
  std::ofstream os(out_file);
  if (!os) throw ConfigError("cannot write '" + out_file + "'");
  save_dataset_csv(ds, os);
  std::cout << "wrote " << ds.size() << " examples to " << out_file << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"partially stochastic infinitely deep BNNs"};
  app.require_subcommand(1);

  std::string config_path, out_dir, checkpoint_path;
  long long seed = -1;
  int threads = 0;

  auto* train_cmd = app.add_subcommand("train", "train a model from a config");
  train_cmd->add_option("--config", config_path, "run config JSON")->required();
  train_cmd->add_option("--seed", seed, "override train.seed");
  train_cmd->add_option("--threads", threads, "batch shards for the ELBO");
  train_cmd->add_option("--out", out_dir, "run directory (default runs/<name>)");

  std::string ood_kind;
  long long eval_samples = -1;
  auto* eval_cmd = app.add_subcommand("eval", "evaluate a checkpoint");
  eval_cmd->add_option("--checkpoint", checkpoint_path, "checkpoint file")
      ->required();
  eval_cmd->add_option("--config", config_path,
                       "run config (default: config.json next to checkpoint)");
  eval_cmd->add_option("--ood", ood_kind,
                       "uniform_noise | gaussian_noise | shifted");
  eval_cmd->add_option("--num-samples", eval_samples, "posterior samples");
  eval_cmd->add_option("--seed", seed, "evaluation seed");
  eval_cmd->add_option("--out", out_dir, "report directory");

  std::string preset, seeds_csv = "0";
  auto* paths_cmd =
      app.add_subcommand("sample-paths", "weight-path samples of the toys");
  paths_cmd->add_option("--preset", preset,
                        "cos-continue | cos-fixed | toy2d-split | "
                        "toy2d-coupled");
  paths_cmd->add_option("--config", config_path, "paths config JSON");
  paths_cmd->add_option("--seeds", seeds_csv, "comma-separated seeds");
  paths_cmd->add_option("--out", out_dir, "output directory");

  double sigma_q = 1.0, sigma_p = 0.5, drift_gap = 0.0;
  std::string steps_csv, out_file;
  auto* kl_cmd =
      app.add_subcommand("kl-diagnose", "discretized KL vs step count");
  kl_cmd->add_option("--sigma-q", sigma_q, "posterior diffusion");
  kl_cmd->add_option("--sigma-p", sigma_p, "prior diffusion");
  kl_cmd->add_option("--drift-gap", drift_gap, "constant f_q - f_p");
  kl_cmd->add_option("--steps", steps_csv, "comma-separated N list");
  kl_cmd->add_option("--out", out_file, "CSV output file");

  std::string kind = "two_moons", gd_ood = "uniform_noise", images, labels;
  std::size_t gd_n = 1000, gd_npc = 500, gd_dx = 2, gd_subset = 0;
  double gd_noise = 0.1, gd_r1 = 1.0, gd_r2 = 2.0, gd_r3 = 3.0;
  std::uint64_t gd_seed = 7;
  auto* gen_cmd = app.add_subcommand("gen-data", "generate a dataset CSV");
  gen_cmd->add_option("--kind", kind, "two_moons | annulus | ood | mnist");
  gen_cmd->add_option("--n", gd_n, "total examples");
  gen_cmd->add_option("--n-per-class", gd_npc, "annulus class size");
  gen_cmd->add_option("--noise-std", gd_noise, "two-moons jitter");
  gen_cmd->add_option("--r1", gd_r1, "inner ball radius");
  gen_cmd->add_option("--r2", gd_r2, "shell inner radius");
  gen_cmd->add_option("--r3", gd_r3, "shell outer radius");
  gen_cmd->add_option("--dx", gd_dx, "feature dimension");
  gen_cmd->add_option("--ood-kind", gd_ood, "OOD distribution");
  gen_cmd->add_option("--images", images, "MNIST IDX image file");
  gen_cmd->add_option("--labels", labels, "MNIST IDX label file");
  gen_cmd->add_option("--subset", gd_subset, "stratified subset size");
  gen_cmd->add_option("--seed", gd_seed, "generation seed");
  gen_cmd->add_option("--out", out_file, "output CSV");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed())
      return cmd_train(config_path, seed, threads, out_dir);
    if (eval_cmd->parsed())
      return cmd_eval(checkpoint_path, config_path, ood_kind, eval_samples,
                      seed, out_dir);
    if (paths_cmd->parsed())
      return cmd_sample_paths(preset, config_path, seeds_csv, out_dir);
    if (kl_cmd->parsed())
      return cmd_kl_diagnose(sigma_q, sigma_p, drift_gap, steps_csv, out_file);
    if (gen_cmd->parsed())
      return cmd_gen_data(kind, gd_n, gd_npc, gd_noise, gd_r1, gd_r2, gd_r3,
                          gd_dx, gd_ood, images, labels, gd_subset, gd_seed,
                          out_file);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
