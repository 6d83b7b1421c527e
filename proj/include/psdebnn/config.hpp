// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "psdebnn/data.hpp"
#include "psdebnn/inference.hpp"
#include "psdebnn/metrics.hpp"

namespace psdebnn {

struct DatasetConfig {
  std::string kind = "two_moons";  // two_moons | annulus | mnist | csv
  std::size_t n = 1000;            // two_moons
  double noise_std = 0.1;
  std::size_t n_per_class = 500;   // annulus
  double r1 = 1.0, r2 = 2.0, r3 = 3.0;
  std::size_t d_x = 2;
  std::string images_path;         // mnist
  std::string labels_path;
  std::size_t subset = 0;          // 0 = all
  std::string csv_path;            // csv
  std::uint64_t seed = 7;
  double val_fraction = 0.2;
  double test_fraction = 0.2;
  bool normalize = true;

  friend bool operator==(const DatasetConfig&, const DatasetConfig&) = default;
};

struct EvalConfig {
  std::size_t num_posterior_samples = 8;
  std::size_t ece_bins = 15;
  std::string ood = "uniform_noise";
  std::size_t ood_n = 0;  // 0 = match test split size
  std::uint64_t seed = 1234;

  friend bool operator==(const EvalConfig&, const EvalConfig&) = default;
};

struct TrainSection {
  double lr = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  std::size_t num_posterior_samples = 1;
  double grad_clip = 10.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t val_samples = 2;
  double target_val_accuracy = 0.0;

  friend bool operator==(const TrainSection&, const TrainSection&) = default;
};

// One experiment: dataset, architecture, partition plan and hyperparameters.
// Named presets mirror the evaluated configurations; explicit fields in a
// config file override the preset, CLI flags override the file.
struct RunConfig {
  std::string name = "run";
  std::string preset;

  DatasetConfig dataset;

  std::vector<std::size_t> fh_hidden{16};
  std::vector<std::size_t> fq_hidden{64};
  std::size_t augment_dim = 0;
  double ou_lambda = 1.0;
  bool prior_residual = true;

  double t1 = 0.0;
  double t2 = 1.0;
  std::size_t num_steps = 60;
  std::string jump_mode = "continue";
  std::string scheme = "midpoint";
  double horizontal_ratio = 0.0;  // >0 switches to the horizontal cut

  double sigma = 0.2;
  double kappa_base = 1e-3;
  bool kappa_scale_by_ratio = true;

  TrainSection train;
  EvalConfig eval;

  // t2 - t1 for vertical cuts, the coordinate fraction for horizontal ones
  double stochasticity_ratio() const {
    return horizontal_ratio > 0.0 ? horizontal_ratio : (t2 - t1);
  }
  double effective_kappa() const;
  void validate() const;  // ConfigError with a field-level message

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

std::vector<std::string> run_preset_names();
void apply_run_preset(RunConfig& cfg, const std::string& preset);
RunConfig run_config_from_preset(const std::string& preset);

RunConfig parse_run_config(const std::string& json_text);
RunConfig load_run_config(const std::string& path);
std::string serialize_run_config(const RunConfig& cfg);

Dataset build_dataset(const DatasetConfig& cfg);
Model build_model(const RunConfig& cfg, std::size_t input_dim,
                  std::size_t num_classes);
TrainConfig build_train_config(const RunConfig& cfg);

// Summary of one eval pass; written out as metric,value,split rows.
struct EvalReport {
  double accuracy = 0.0;
  double ece = 0.0;
  double mean_entropy_id = 0.0;
  double mean_entropy_ood = 0.0;
  double roc_auc = 0.0;
  double inference_secs = 0.0;
  std::uint64_t brownian_draws = 0;
  std::uint64_t u_theta_evals = 0;
  std::vector<double> id_entropies;
  std::vector<double> ood_entropies;
  std::vector<RocPoint> roc_points;
};
EvalReport run_eval(const Model& model, const ParamStore& params,
                    const Dataset& data, const EvalConfig& cfg);
void write_eval_report_csv(std::ostream& os, const EvalReport& report);

// Weights-only sample-path runs (the toy drift settings).
struct PathsConfig {
  std::string drift = "cosine";  // cosine | toy-split | toy-coupled
  double t1 = 0.3;
  double t2 = 0.6;
  double sigma = 1.0;
  std::size_t num_steps = 120;
  std::string jump_mode = "continue";
  std::string scheme = "midpoint";
  std::size_t dim = 1;
  std::vector<double> w0{0.0};
  std::size_t horizontal_m1 = 0;
  double prior_lambda = 1.0;
  bool with_kl = true;

  void validate() const;
  friend bool operator==(const PathsConfig&, const PathsConfig&) = default;
};

std::vector<std::string> paths_preset_names();
PathsConfig paths_config_from_preset(const std::string& preset);
PathsConfig parse_paths_config(const std::string& json_text);
PathRecord run_sample_path(const PathsConfig& cfg, std::uint64_t seed);

}  // namespace psdebnn
