// SPDX-License-Identifier: Apache-2.0
//
// The variational objective and everything that consumes it: u_theta, the
// path-space ELBO with Monte Carlo posterior samples, the discretized-KL
// diagnostic, the Adam training loop with best-validation checkpointing,
// posterior-averaged prediction, and checkpoint serialization.
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "psdebnn/data.hpp"
#include "psdebnn/params.hpp"
#include "psdebnn/solvers.hpp"

namespace psdebnn {

struct ModelSpec {
  MlpSpec fh;                            // hidden-state net, in = out = dh
  std::vector<std::size_t> fq_hidden;    // hidden widths of the weight drift
  std::size_t num_classes = 2;
  std::size_t input_dim = 0;             // d_x
  std::size_t augment_dim = 0;           // dh = d_x + augment_dim
  double ou_lambda = 1.0;                // OU prior rate
  bool prior_residual = true;            // f_q = f_p + correction at init
  std::size_t horizontal_m1 = 0;         // 0 = vertical separation only

  std::size_t dh() const { return input_dim + augment_dim; }
  std::size_t dw() const { return fh.param_count(); }
  void validate() const;

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

struct ElboBreakdown {
  double log_likelihood = 0.0;  // dataset-size-scaled, averaged over samples
  double kl_integral = 0.0;     // ∫||u||^2 dt estimate, averaged over samples
  double kappa = 0.0;
  double elbo = 0.0;            // log_likelihood - kappa * kl_integral
  std::size_t num_posterior_samples = 0;
};

// A model = spec + regime schedule + diffusion scale. Parameters live in a
// ParamStore; bind() plants them as leaves on a tape.
class Model {
 public:
  Model(ModelSpec spec, RegimeSchedule schedule, double sigma);

  const ModelSpec& spec() const { return spec_; }
  const RegimeSchedule& schedule() const { return schedule_; }
  double sigma() const { return sigma_; }
  std::size_t dw() const { return spec_.dw(); }
  std::size_t dh() const { return spec_.dh(); }
  // solver steps falling inside the stochastic window
  std::size_t noise_steps() const;
  std::size_t noise_dim() const;
  double window_dt() const;

  // Registers w0, the drift parameters (theta, or theta_s/theta_d under a
  // horizontal cut), the linear head, and w_t2 for learnable jumps.
  void init_params(ParamStore& store, std::uint64_t seed) const;

  struct Bound {
    std::vector<std::pair<std::string, NodeId>> leaves;  // store order
    NodeId w0, head_w, head_b;
    std::unique_ptr<WeightDrift> fq;
    std::unique_ptr<HiddenDrift> fh;
    JointSystem system;
  };
  Bound bind(Tape& tape, const ParamStore& store) const;

  struct Forward {
    NodeId logits;  // {B, C}
    NodeId kl;      // scalar
    NodeId h1;      // {B, dh}
    PathRecord record;
  };
  // One posterior sample over a feature batch {B, d_x}.
  Forward forward(Tape& tape, const Bound& bound, const Tensor& x_batch,
                  const BrownianPath& noise, bool with_kl,
                  bool record_path = false) const;

  BrownianPath draw_noise(std::uint64_t seed) const;

  // Drift mismatch (f_p - f_q)/sigma on the stochastic block.
  Tensor u_theta(double t, const WeightState& w, const ParamStore& store) const;

 private:
  ModelSpec spec_;
  RegimeSchedule schedule_;
  double sigma_;
  MlpSpec fq_spec_;          // vertical
  MlpSpec fq_s_spec_, fq_d_spec_;  // horizontal
};

std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, std::size_t n);

// Monte Carlo ELBO over the batch; optionally accumulates d(-elbo)/dTheta
// into the store's gradient slots (batch may be sharded over threads, the
// KL path term is computed once). mean_probs, when given, receives the
// posterior-averaged softmax probabilities of the batch.
ElboBreakdown elbo(const Model& model, ParamStore& store,
                   const Tensor& x_batch, const std::vector<int>& labels,
                   double dataset_scale, double kappa,
                   const std::vector<std::uint64_t>& noise_seeds,
                   bool with_grads, std::size_t threads = 1,
                   Tensor* mean_probs = nullptr);

// Posterior-averaged class probabilities, one Brownian path per seed.
Tensor predict_with_seeds(const Model& model, const ParamStore& store,
                          const Tensor& x_batch,
                          const std::vector<std::uint64_t>& seeds);
Tensor predict(const Model& model, const ParamStore& store,
               const Tensor& x_batch, std::size_t num_samples,
               std::uint64_t seed);

// Discretized KL between two scalar diffusions with shared Brownian source,
// evaluated along the noise-free posterior path; the Gaussian transition
// formula admits sigma_q != sigma_p, which training itself forbids.
struct KlDiagnosisRow {
  std::size_t num_steps;
  double kl;
  double kl_per_step;
};
std::vector<KlDiagnosisRow> kl_diagnose(
    double sigma_q, double sigma_p,
    const std::function<double(double, double)>& f_q,
    const std::function<double(double, double)>& f_p,
    const std::vector<std::size_t>& steps_list);

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 128;
  std::size_t epochs = 100;
  std::size_t num_posterior_samples = 1;
  double kappa = 1e-3;
  double grad_clip = 10.0;
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::size_t val_samples = 2;     // per-epoch validation predictions
  std::size_t ece_bins = 15;
  // stop as soon as an epoch's validation accuracy reaches this (0 = off)
  double target_val_accuracy = 0.0;
};

struct TrainLogRow {
  std::size_t epoch = 0;
  double elbo = 0.0;
  double log_lik = 0.0;
  double kl = 0.0;
  double train_accuracy = 0.0;  // from the training-pass predictions
  double val_accuracy = 0.0;
  double val_ece = 0.0;
  double epoch_secs = 0.0;
  bool numerics_event = false;
};

struct TrainResult {
  std::vector<TrainLogRow> log;
  double best_metric = 0.0;      // best validation accuracy seen
  std::size_t best_epoch = 0;
  ParamStore best_params;        // checkpoint at the best validation accuracy
};

// Adam ascent on the ELBO. A NumericsError aborts the epoch, restores the
// best checkpoint and logs the event. Validation accuracy drives
// checkpointing; with an empty validation split the train split stands in.
TrainResult train(const Model& model, ParamStore& store, const Dataset& data,
                  const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_epoch = {});

void write_train_log_csv(std::ostream& os, const std::vector<TrainLogRow>& log);

// Versioned binary checkpoint: named parameter arrays with Adam state, the
// flattening-order tag, model spec and schedule. Layout documented in
// docs/checkpoint_format.md.
struct Checkpoint {
  ModelSpec model;
  RegimeSchedule schedule;
  double sigma = 0.0;
  ParamStore params;
};
void save_checkpoint(const std::string& path, const Model& model,
                     const ParamStore& params);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace psdebnn
