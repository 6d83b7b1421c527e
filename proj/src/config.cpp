// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/config.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "psdebnn/errors.hpp"
#include "psdebnn/json_io.hpp"
#include "psdebnn/metrics.hpp"

namespace psdebnn {

double RunConfig::effective_kappa() const {
  const double rs = stochasticity_ratio();
  if (kappa_scale_by_ratio && rs > 0.0) return kappa_base / rs;
  return kappa_base;
}

void RunConfig::validate() const {
  if (!(t1 >= 0.0 && t1 <= t2 && t2 <= 1.0))
    throw ConfigError("schedule: need 0 <= t1 <= t2 <= 1");
  if (num_steps == 0) throw ConfigError("schedule.num_steps: must be >= 1");
  if (horizontal_ratio < 0.0 || horizontal_ratio >= 1.0)
    throw ConfigError("schedule.horizontal_ratio: must lie in [0,1)");
  if (horizontal_ratio > 0.0 && !(t1 == 0.0 && t2 == 1.0))
    throw ConfigError(
        "schedule.horizontal_ratio: the horizontal cut runs over the whole "
        "interval (t1=0, t2=1)");
  if (sigma < 0.0) throw ConfigError("sigma: must be nonnegative");
  if (t2 > t1 && sigma == 0.0)
    throw ConfigError("sigma: must be positive for a nonempty window");
  if (kappa_base < 0.0) throw ConfigError("kappa_base: must be nonnegative");
  if (fh_hidden.empty()) throw ConfigError("model.fh_hidden: must be nonempty");
  if (fq_hidden.empty()) throw ConfigError("model.fq_hidden: must be nonempty");
  if (train.lr < 0.0) throw ConfigError("train.lr: must be nonnegative");
  if (train.batch_size == 0) throw ConfigError("train.batch_size: must be >= 1");
  if (train.num_posterior_samples == 0)
    throw ConfigError("train.num_posterior_samples: must be >= 1");
  if (eval.num_posterior_samples == 0)
    throw ConfigError("eval.num_posterior_samples: must be >= 1");
  if (eval.ece_bins == 0) throw ConfigError("eval.ece_bins: must be >= 1");
  jump_mode_from_string(jump_mode);
  det_scheme_from_string(scheme);
  ood_kind_from_string(eval.ood);
  // named presets pin the stochasticity ratio
  if (preset == "odefirst" || preset == "sdefirst" ||
      preset == "sdefirst-fixw2") {
    if (std::fabs(stochasticity_ratio() - 0.1) > 1e-12)
      throw ConfigError("preset '" + preset +
                        "' expects stochasticity ratio 0.1");
  } else if (preset == "horcut") {
    if (std::fabs(horizontal_ratio - 0.5) > 1e-12)
      throw ConfigError("preset 'horcut' expects horizontal ratio 0.5");
  }
}

std::vector<std::string> run_preset_names() {
  return {"sdebnn", "odefirst", "sdefirst", "sdefirst-fixw2", "horcut"};
}

void apply_run_preset(RunConfig& cfg, const std::string& preset) {
  cfg.preset = preset;
  cfg.sigma = 0.2;
  cfg.num_steps = 60;
  cfg.scheme = "midpoint";
  cfg.train.lr = 1e-3;
  cfg.train.batch_size = 128;
  cfg.train.num_posterior_samples = 1;
  cfg.horizontal_ratio = 0.0;
  cfg.kappa_base = 1e-3;
  if (preset == "sdebnn") {
    // fully stochastic baseline
    cfg.t1 = 0.0;
    cfg.t2 = 1.0;
    cfg.jump_mode = "continue";
    cfg.kappa_scale_by_ratio = false;
  } else if (preset == "odefirst") {
    cfg.t1 = 0.9;
    cfg.t2 = 1.0;
    cfg.jump_mode = "continue";
    cfg.kappa_scale_by_ratio = true;
  } else if (preset == "sdefirst") {
    cfg.t1 = 0.0;
    cfg.t2 = 0.1;
    cfg.jump_mode = "continue";
    cfg.kappa_scale_by_ratio = true;
  } else if (preset == "sdefirst-fixw2") {
    cfg.t1 = 0.0;
    cfg.t2 = 0.1;
    cfg.jump_mode = "learnable";
    cfg.kappa_scale_by_ratio = true;
  } else if (preset == "horcut") {
    cfg.t1 = 0.0;
    cfg.t2 = 1.0;
    cfg.jump_mode = "continue";
    cfg.horizontal_ratio = 0.5;
    cfg.kappa_scale_by_ratio = true;
  } else {
    throw ConfigError("unknown preset '" + preset + "'");
  }
}

RunConfig run_config_from_preset(const std::string& preset) {
  RunConfig cfg;
  apply_run_preset(cfg, preset);
  return cfg;
}

namespace {

using nlohmann::json;

template <typename T>
void pick(const json& j, const char* key, T& dst) {
  if (j.contains(key)) j.at(key).get_to(dst);
}

void merge_dataset(const json& j, DatasetConfig& c) {
  pick(j, "kind", c.kind);
  pick(j, "n", c.n);
  pick(j, "noise_std", c.noise_std);
  pick(j, "n_per_class", c.n_per_class);
  pick(j, "r1", c.r1);
  pick(j, "r2", c.r2);
  pick(j, "r3", c.r3);
  pick(j, "d_x", c.d_x);
  pick(j, "images_path", c.images_path);
  pick(j, "labels_path", c.labels_path);
  pick(j, "subset", c.subset);
  pick(j, "csv_path", c.csv_path);
  pick(j, "seed", c.seed);
  pick(j, "val_fraction", c.val_fraction);
  pick(j, "test_fraction", c.test_fraction);
  pick(j, "normalize", c.normalize);
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  RunConfig cfg;
  try {
    if (j.contains("preset"))
      apply_run_preset(cfg, j.at("preset").get<std::string>());
    pick(j, "name", cfg.name);
    if (j.contains("dataset")) merge_dataset(j.at("dataset"), cfg.dataset);
    if (j.contains("model")) {
      const json& m = j.at("model");
      pick(m, "fh_hidden", cfg.fh_hidden);
      pick(m, "fq_hidden", cfg.fq_hidden);
      pick(m, "augment_dim", cfg.augment_dim);
      pick(m, "ou_lambda", cfg.ou_lambda);
      pick(m, "prior_residual", cfg.prior_residual);
    }
    if (j.contains("schedule")) {
      const json& s = j.at("schedule");
      pick(s, "t1", cfg.t1);
      pick(s, "t2", cfg.t2);
      pick(s, "num_steps", cfg.num_steps);
      pick(s, "jump_mode", cfg.jump_mode);
      pick(s, "scheme", cfg.scheme);
      pick(s, "horizontal_ratio", cfg.horizontal_ratio);
    }
    pick(j, "sigma", cfg.sigma);
    pick(j, "kappa_base", cfg.kappa_base);
    pick(j, "kappa_scale_by_ratio", cfg.kappa_scale_by_ratio);
    if (j.contains("train")) {
      const json& t = j.at("train");
      pick(t, "lr", cfg.train.lr);
      pick(t, "batch_size", cfg.train.batch_size);
      pick(t, "epochs", cfg.train.epochs);
      pick(t, "num_posterior_samples", cfg.train.num_posterior_samples);
      pick(t, "grad_clip", cfg.train.grad_clip);
      pick(t, "seed", cfg.train.seed);
      pick(t, "threads", cfg.train.threads);
      pick(t, "val_samples", cfg.train.val_samples);
      pick(t, "target_val_accuracy", cfg.train.target_val_accuracy);
    }
    if (j.contains("eval")) {
      const json& e = j.at("eval");
      pick(e, "num_posterior_samples", cfg.eval.num_posterior_samples);
      pick(e, "ece_bins", cfg.eval.ece_bins);
      pick(e, "ood", cfg.eval.ood);
      pick(e, "ood_n", cfg.eval.ood_n);
      pick(e, "seed", cfg.eval.seed);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config field error: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw ConfigError("cannot open config '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_run_config(ss.str());
}

std::string serialize_run_config(const RunConfig& c) {
  json j;
  j["name"] = c.name;
  if (!c.preset.empty()) j["preset"] = c.preset;
  j["dataset"] = {{"kind", c.dataset.kind},
                  {"n", c.dataset.n},
                  {"noise_std", c.dataset.noise_std},
                  {"n_per_class", c.dataset.n_per_class},
                  {"r1", c.dataset.r1},
                  {"r2", c.dataset.r2},
                  {"r3", c.dataset.r3},
                  {"d_x", c.dataset.d_x},
                  {"images_path", c.dataset.images_path},
                  {"labels_path", c.dataset.labels_path},
                  {"subset", c.dataset.subset},
                  {"csv_path", c.dataset.csv_path},
                  {"seed", c.dataset.seed},
                  {"val_fraction", c.dataset.val_fraction},
                  {"test_fraction", c.dataset.test_fraction},
                  {"normalize", c.dataset.normalize}};
  j["model"] = {{"fh_hidden", c.fh_hidden},
                {"fq_hidden", c.fq_hidden},
                {"augment_dim", c.augment_dim},
                {"ou_lambda", c.ou_lambda},
                {"prior_residual", c.prior_residual}};
  j["schedule"] = {{"t1", c.t1},
                   {"t2", c.t2},
                   {"num_steps", c.num_steps},
                   {"jump_mode", c.jump_mode},
                   {"scheme", c.scheme},
                   {"horizontal_ratio", c.horizontal_ratio}};
  j["sigma"] = c.sigma;
  j["kappa_base"] = c.kappa_base;
  j["kappa_scale_by_ratio"] = c.kappa_scale_by_ratio;
  j["train"] = {{"lr", c.train.lr},
                {"batch_size", c.train.batch_size},
                {"epochs", c.train.epochs},
                {"num_posterior_samples", c.train.num_posterior_samples},
                {"grad_clip", c.train.grad_clip},
                {"seed", c.train.seed},
                {"threads", c.train.threads},
                {"val_samples", c.train.val_samples},
                {"target_val_accuracy", c.train.target_val_accuracy}};
  j["eval"] = {{"num_posterior_samples", c.eval.num_posterior_samples},
               {"ece_bins", c.eval.ece_bins},
               {"ood", c.eval.ood},
               {"ood_n", c.eval.ood_n},
               {"seed", c.eval.seed}};
  return j.dump(2);
}

Dataset build_dataset(const DatasetConfig& cfg) {
  Dataset ds;
  if (cfg.kind == "two_moons") {
    ds = gen_two_moons(cfg.n, cfg.noise_std, cfg.seed);
  } else if (cfg.kind == "annulus") {
    ds = gen_annulus(cfg.n_per_class, cfg.r1, cfg.r2, cfg.r3, cfg.seed,
                     cfg.d_x);
  } else if (cfg.kind == "mnist") {
    ds = load_mnist_idx(cfg.images_path, cfg.labels_path, cfg.subset,
                        cfg.seed);
  } else if (cfg.kind == "csv") {
    std::ifstream is(cfg.csv_path);
    if (!is) throw ConfigError("cannot open dataset CSV '" + cfg.csv_path + "'");
    ds = load_dataset_csv(is);
  } else {
    throw ConfigError("dataset.kind: unknown kind '" + cfg.kind + "'");
  }
  assign_splits(ds, cfg.val_fraction, cfg.test_fraction, cfg.seed + 1);
  if (cfg.normalize) normalize_with_train_stats(ds);
  return ds;
}

Model build_model(const RunConfig& cfg, std::size_t input_dim,
                  std::size_t num_classes) {
  ModelSpec spec;
  spec.input_dim = input_dim;
  spec.augment_dim = cfg.augment_dim;
  spec.num_classes = num_classes;
  spec.fq_hidden = cfg.fq_hidden;
  spec.ou_lambda = cfg.ou_lambda;
  spec.prior_residual = cfg.prior_residual;
  spec.fh.widths.push_back(spec.dh());
  spec.fh.widths.insert(spec.fh.widths.end(), cfg.fh_hidden.begin(),
                        cfg.fh_hidden.end());
  spec.fh.widths.push_back(spec.dh());
  spec.fh.time_input = true;
  if (cfg.horizontal_ratio > 0.0)
    spec.horizontal_m1 = static_cast<std::size_t>(
        std::ceil(cfg.horizontal_ratio * static_cast<double>(spec.dw())));

  RegimeSchedule sched;
  sched.t1 = cfg.t1;
  sched.t2 = cfg.t2;
  sched.num_steps = cfg.num_steps;
  sched.jump_mode = jump_mode_from_string(cfg.jump_mode);
  sched.scheme = det_scheme_from_string(cfg.scheme);
  return Model(std::move(spec), std::move(sched), cfg.sigma);
}

TrainConfig build_train_config(const RunConfig& cfg) {
  TrainConfig t;
  t.lr = cfg.train.lr;
  t.batch_size = cfg.train.batch_size;
  t.epochs = cfg.train.epochs;
  t.num_posterior_samples = cfg.train.num_posterior_samples;
  t.kappa = cfg.effective_kappa();
  t.grad_clip = cfg.train.grad_clip;
  t.seed = cfg.train.seed;
  t.threads = cfg.train.threads;
  t.val_samples = cfg.train.val_samples;
  t.target_val_accuracy = cfg.train.target_val_accuracy;
  t.ece_bins = cfg.eval.ece_bins;
  return t;
}

EvalReport run_eval(const Model& model, const ParamStore& params,
                    const Dataset& data, const EvalConfig& cfg) {
  EvalReport rep;
  const Tensor x_test = data.features_of(Split::kTest);
  const std::vector<int> y_test = data.labels_of(Split::kTest);
  if (x_test.shape[0] == 0) throw ContractError("eval: empty test split");

  const std::size_t ood_n = cfg.ood_n == 0 ? x_test.shape[0] : cfg.ood_n;
  const Dataset ood = gen_ood(ood_n, data.dim(),
                              ood_kind_from_string(cfg.ood), cfg.seed + 99);

  const std::uint64_t draws0 = brownian_scalar_draws();
  const std::uint64_t uevals0 = u_theta_eval_count();
  const auto tic = std::chrono::steady_clock::now();

  const Tensor probs_id =
      predict(model, params, x_test, cfg.num_posterior_samples, cfg.seed);
  const Tensor probs_ood = predict(model, params, ood.features,
                                   cfg.num_posterior_samples, cfg.seed + 1);

  rep.inference_secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
          .count();
  rep.brownian_draws = brownian_scalar_draws() - draws0;
  rep.u_theta_evals = u_theta_eval_count() - uevals0;

  PredictionSet ps_id{probs_id, y_test, "ID"};
  rep.accuracy = accuracy(ps_id);
  rep.ece = ece(ps_id, cfg.ece_bins);
  rep.id_entropies = predictive_entropies(probs_id);
  rep.ood_entropies = predictive_entropies(probs_ood);
  auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return v.empty() ? 0.0 : s / static_cast<double>(v.size());
  };
  rep.mean_entropy_id = mean(rep.id_entropies);
  rep.mean_entropy_ood = mean(rep.ood_entropies);
  const RocResult roc = roc_auc(rep.id_entropies, rep.ood_entropies);
  rep.roc_auc = roc.auc;
  rep.roc_points = roc.points;
  return rep;
}

void write_eval_report_csv(std::ostream& os, const EvalReport& rep) {
  write_metrics_csv(
      os, {{"accuracy", rep.accuracy, "test"},
           {"ece", rep.ece, "test"},
           {"mean_entropy", rep.mean_entropy_id, "test"},
           {"mean_entropy", rep.mean_entropy_ood, "ood"},
           {"roc_auc", rep.roc_auc, "ood"},
           {"inference_secs", rep.inference_secs, "test"},
           {"brownian_draws", static_cast<double>(rep.brownian_draws), "eval"},
           {"u_theta_evals", static_cast<double>(rep.u_theta_evals), "eval"}});
}

void PathsConfig::validate() const {
  if (!(t1 >= 0.0 && t1 <= t2 && t2 <= 1.0))
    throw ConfigError("paths: need 0 <= t1 <= t2 <= 1");
  if (w0.size() != dim) throw ConfigError("paths: w0 length must equal dim");
  if (drift != "cosine" && drift != "toy-split" && drift != "toy-coupled")
    throw ConfigError("paths: unknown drift '" + drift + "'");
  if ((drift == "toy-split" || drift == "toy-coupled") &&
      (dim != 2 || horizontal_m1 != 1))
    throw ConfigError("paths: the 2-d toy drifts need dim=2, horizontal_m1=1");
  if (horizontal_m1 > dim) throw ConfigError("paths: horizontal_m1 > dim");
  jump_mode_from_string(jump_mode);
  det_scheme_from_string(scheme);
}

std::vector<std::string> paths_preset_names() {
  return {"cos-continue", "cos-fixed", "toy2d-split", "toy2d-coupled"};
}

PathsConfig paths_config_from_preset(const std::string& preset) {
  PathsConfig c;
  if (preset == "cos-continue" || preset == "cos-fixed") {
    c.drift = "cosine";
    c.t1 = 0.3;
    c.t2 = 0.6;
    c.sigma = 1.0;
    c.dim = 1;
    c.w0 = {0.0};
    c.num_steps = 120;
    c.jump_mode = preset == "cos-fixed" ? "fixed_a_priori" : "continue";
    c.prior_lambda = 0.0;
    c.with_kl = false;
  } else if (preset == "toy2d-split" || preset == "toy2d-coupled") {
    c.drift = preset == "toy2d-split" ? "toy-split" : "toy-coupled";
    c.t1 = 0.0;
    c.t2 = 1.0;
    c.sigma = 1.0;
    c.dim = 2;
    c.w0 = {0.0, 0.0};
    c.horizontal_m1 = 1;
    c.num_steps = 60;
    c.jump_mode = "continue";
    c.prior_lambda = 0.0;
    c.with_kl = false;
  } else {
    throw ConfigError("unknown sample-paths preset '" + preset + "'");
  }
  return c;
}

PathsConfig parse_paths_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("paths config is not valid JSON: ") +
                      e.what());
  }
  PathsConfig c;
  if (j.contains("preset"))
    c = paths_config_from_preset(j.at("preset").get<std::string>());
  pick(j, "drift", c.drift);
  pick(j, "t1", c.t1);
  pick(j, "t2", c.t2);
  pick(j, "sigma", c.sigma);
  pick(j, "num_steps", c.num_steps);
  pick(j, "jump_mode", c.jump_mode);
  pick(j, "scheme", c.scheme);
  pick(j, "dim", c.dim);
  pick(j, "w0", c.w0);
  pick(j, "horizontal_m1", c.horizontal_m1);
  pick(j, "prior_lambda", c.prior_lambda);
  pick(j, "with_kl", c.with_kl);
  c.validate();
  return c;
}

PathRecord run_sample_path(const PathsConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Tape tape;

  std::unique_ptr<WeightDrift> drift;
  if (cfg.drift == "cosine")
    drift = std::make_unique<CosineBurstDrift>(cfg.dim, cfg.t1, cfg.t2);
  else if (cfg.drift == "toy-split")
    drift = std::make_unique<ToySplitDrift>();
  else
    drift = std::make_unique<ToyCoupledDrift>();

  RegimeSchedule sched;
  sched.t1 = cfg.t1;
  sched.t2 = cfg.t2;
  sched.num_steps = cfg.num_steps;
  sched.jump_mode = jump_mode_from_string(cfg.jump_mode);
  sched.scheme = det_scheme_from_string(cfg.scheme);
  if (cfg.horizontal_m1 > 0 && cfg.horizontal_m1 < cfg.dim)
    sched.horizontal = WeightPartition::leading(cfg.horizontal_m1, cfg.dim);

  JointSystem system;
  system.fq = drift.get();
  system.diffusion = DiffusionSpec{cfg.sigma, cfg.t1, cfg.t2};
  system.prior_lambda = cfg.prior_lambda;
  if (sched.jump_mode != JumpMode::kContinue)
    system.w_jump = tape.constant(Tensor::zeros({cfg.dim}));

  const StepGrid grid = make_step_grid(sched);
  const double dt =
      grid.num_inside == 0
          ? 0.0
          : (cfg.t2 - cfg.t1) / static_cast<double>(grid.num_inside);
  const std::size_t noise_dim =
      sched.horizontal ? sched.horizontal->s.size() : cfg.dim;
  const BrownianPath noise =
      sample_brownian(seed, grid.num_inside, noise_dim, dt);

  IntegrateOptions opts;
  opts.with_kl = cfg.with_kl;
  opts.record_path = true;
  const NodeId w0 = tape.constant(Tensor::vec(cfg.w0));
  const IntegrateResult res =
      integrate_joint(tape, system, sched, noise, w0, NodeId{}, opts);
  return res.record;
}

}  // namespace psdebnn
