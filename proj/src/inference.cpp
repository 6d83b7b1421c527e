// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/inference.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <ostream>
#include <random>
#include <thread>

#include "psdebnn/errors.hpp"
#include "psdebnn/json_io.hpp"
#include "psdebnn/kernels.hpp"
#include "psdebnn/metrics.hpp"

namespace psdebnn {

void ModelSpec::validate() const {
  fh.validate();
  if (!fh.time_input)
    throw ConfigError("f_h must receive time as an input coordinate");
  if (fh.in_dim() != dh() || fh.out_dim() != dh())
    throw ConfigError("f_h widths must start and end at d_h = " +
                      std::to_string(dh()));
  if (fq_hidden.empty())
    throw ConfigError("weight drift needs at least one hidden width");
  if (num_classes < 2) throw ConfigError("need at least two classes");
  if (input_dim == 0) throw ConfigError("input dimension must be positive");
  if (horizontal_m1 > 0 && (horizontal_m1 >= dw()))
    throw ConfigError("horizontal_m1 must lie in [1, d_w-1], d_w = " +
                      std::to_string(dw()));
}

namespace {

MlpSpec drift_spec(std::size_t dim, const std::vector<std::size_t>& hidden) {
  MlpSpec s;
  s.widths.push_back(dim);
  s.widths.insert(s.widths.end(), hidden.begin(), hidden.end());
  s.widths.push_back(dim);
  s.time_input = true;
  return s;
}

}  // namespace

Model::Model(ModelSpec spec, RegimeSchedule schedule, double sigma)
    : spec_(std::move(spec)), schedule_(std::move(schedule)), sigma_(sigma) {
  spec_.validate();
  if (spec_.horizontal_m1 > 0) {
    fq_s_spec_ = drift_spec(spec_.horizontal_m1, spec_.fq_hidden);
    fq_d_spec_ = drift_spec(dw() - spec_.horizontal_m1, spec_.fq_hidden);
    schedule_.horizontal = WeightPartition::leading(spec_.horizontal_m1, dw());
  } else {
    fq_spec_ = drift_spec(dw(), spec_.fq_hidden);
    schedule_.horizontal.reset();
  }
  schedule_.validate();
  if (schedule_.stochasticity_ratio() > 0.0 && sigma_ <= 0.0)
    throw ConfigError("sigma must be positive inside a stochastic window");
}

std::size_t Model::noise_steps() const {
  return make_step_grid(schedule_).num_inside;
}

std::size_t Model::noise_dim() const {
  return spec_.horizontal_m1 > 0 ? spec_.horizontal_m1 : dw();
}

double Model::window_dt() const {
  const std::size_t n = noise_steps();
  return n == 0 ? 0.0 : (schedule_.t2 - schedule_.t1) / static_cast<double>(n);
}

void Model::init_params(ParamStore& store, std::uint64_t seed) const {
  std::mt19937_64 rng(seed);
  store.add("w0", mlp_init(spec_.fh, rng, /*zero_final=*/false));
  if (spec_.horizontal_m1 > 0) {
    store.add("theta_s", mlp_init(fq_s_spec_, rng, /*zero_final=*/true));
    store.add("theta_d", mlp_init(fq_d_spec_, rng, /*zero_final=*/true));
  } else {
    store.add("theta", mlp_init(fq_spec_, rng, /*zero_final=*/true));
  }
  {
    Tensor w = Tensor::zeros({spec_.num_classes, dh()});
    const double bound = 1.0 / std::sqrt(static_cast<double>(dh()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (double& v : w.data) v = dist(rng);
    store.add("head_w", std::move(w));
    store.add("head_b", Tensor::zeros({spec_.num_classes}));
  }
  if (schedule_.jump_mode == JumpMode::kLearnable && schedule_.t2 < 1.0 &&
      schedule_.stochasticity_ratio() > 0.0)
    store.add("w_t2", Tensor::zeros({dw()}));
}

Model::Bound Model::bind(Tape& tape, const ParamStore& store) const {
  Bound b;
  NodeId theta, theta_s, theta_d, w_t2;
  for (const auto& slot : store.slots()) {
    const NodeId id = tape.leaf(slot.value);
    b.leaves.emplace_back(slot.name, id);
    if (slot.name == "w0") b.w0 = id;
    else if (slot.name == "theta") theta = id;
    else if (slot.name == "theta_s") theta_s = id;
    else if (slot.name == "theta_d") theta_d = id;
    else if (slot.name == "head_w") b.head_w = id;
    else if (slot.name == "head_b") b.head_b = id;
    else if (slot.name == "w_t2") w_t2 = id;
  }
  const double residual = spec_.prior_residual ? spec_.ou_lambda : 0.0;
  if (spec_.horizontal_m1 > 0) {
    b.fq = std::make_unique<SplitMlpWeightDrift>(
        fq_s_spec_, theta_s, fq_d_spec_, theta_d, *schedule_.horizontal,
        residual);
  } else {
    b.fq = std::make_unique<MlpWeightDrift>(fq_spec_, theta, residual);
  }
  b.fh = std::make_unique<MlpHiddenDrift>(spec_.fh);

  b.system.fq = b.fq.get();
  b.system.fh = b.fh.get();
  b.system.diffusion = DiffusionSpec{sigma_, schedule_.t1, schedule_.t2};
  b.system.prior_lambda = spec_.ou_lambda;
  if (schedule_.jump_mode == JumpMode::kFixedAPriori)
    b.system.w_jump = tape.constant(Tensor::zeros({dw()}));
  else if (schedule_.jump_mode == JumpMode::kLearnable && w_t2.valid())
    b.system.w_jump = w_t2;
  return b;
}

Model::Forward Model::forward(Tape& tape, const Bound& bound,
                              const Tensor& x_batch, const BrownianPath& noise,
                              bool with_kl, bool record_path) const {
  if (x_batch.rank() != 2 || x_batch.shape[1] != spec_.input_dim)
    throw ShapeError("forward: expected {B," + std::to_string(spec_.input_dim) +
                     "} inputs, got " + shape_str(x_batch.shape));
  const std::size_t batch = x_batch.shape[0];

  Tensor h0 = Tensor::zeros({batch, dh()});
  for (std::size_t i = 0; i < batch; ++i)
    std::memcpy(h0.data.data() + i * dh(), x_batch.data.data() + i * spec_.input_dim,
                spec_.input_dim * sizeof(double));

  IntegrateOptions opts;
  opts.with_kl = with_kl;
  opts.record_path = record_path;
  IntegrateResult res =
      integrate_joint(tape, bound.system, schedule_, noise, bound.w0,
                      tape.constant(std::move(h0)), opts);

  Forward out;
  out.h1 = res.h1;
  out.kl = res.kl;
  out.record = std::move(res.record);
  out.logits = tape.add_rowvec(
      tape.matmul(res.h1, tape.transpose(bound.head_w)), bound.head_b);
  return out;
}

BrownianPath Model::draw_noise(std::uint64_t seed) const {
  return sample_brownian(seed, noise_steps(), noise_dim(), window_dt());
}

Tensor Model::u_theta(double t, const WeightState& w,
                      const ParamStore& store) const {
  if (sigma_ <= 0.0)
    throw ConfigError("u_theta: sigma must be positive");
  Tape tape;
  const Bound bound = bind(tape, store);
  const NodeId wn = tape.constant(w.w);
  const WeightPartition part =
      w.partition ? *w.partition : WeightPartition::all_stochastic(w.w.numel());
  NodeId f_s;
  NodeId w_s;
  if (part.d.empty()) {
    w_s = wn;
    f_s = bound.fq->eval(tape, t, wn);
  } else {
    w_s = tape.gather(wn, part.s, {part.s.size()});
    f_s = bound.fq->is_split()
              ? bound.fq->eval_s(tape, t, w_s)
              : tape.gather(bound.fq->eval(tape, t, wn), part.s,
                            {part.s.size()});
  }
  const NodeId prior = tape.scale(w_s, -spec_.ou_lambda);
  const NodeId u = tape.scale(tape.sub(prior, f_s), 1.0 / sigma_);
  return tape.value(u);
}

std::vector<std::uint64_t> derive_seeds(std::uint64_t seed, std::size_t n) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint64_t> out(n);
  for (auto& s : out) s = rng();
  return out;
}

namespace {

struct ShardTask {
  std::size_t row_begin = 0;
  std::size_t row_count = 0;
  bool owns_kl = false;
};

struct ShardResult {
  double loglik_scaled = 0.0;  // summed over posterior samples
  double kl = 0.0;             // summed over posterior samples
  Tensor probs_sum;            // {rows, C}
  std::vector<Tensor> grads;   // per leaf, store order
  std::exception_ptr error;
};

Tensor take_rows(const Tensor& m, std::size_t begin, std::size_t count) {
  Tensor out = Tensor::zeros({count, m.shape[1]});
  std::memcpy(out.data.data(), m.data.data() + begin * m.shape[1],
              count * m.shape[1] * sizeof(double));
  return out;
}

void elbo_shard(const Model& model, const ParamStore& store,
                const Tensor& x_batch, const std::vector<int>& labels,
                double dataset_scale, double kappa,
                const std::vector<std::uint64_t>& noise_seeds, bool with_grads,
                const ShardTask& task, ShardResult& out) {
  try {
    const Tensor x = take_rows(x_batch, task.row_begin, task.row_count);
    const std::vector<int> y(labels.begin() + task.row_begin,
                             labels.begin() + task.row_begin + task.row_count);
    const bool with_kl = task.owns_kl && model.noise_steps() > 0;

    Tape tape;
    const Model::Bound bound = model.bind(tape, store);
    out.probs_sum = Tensor::zeros({task.row_count, model.spec().num_classes});

    NodeId total;
    for (std::size_t s = 0; s < noise_seeds.size(); ++s) {
      const BrownianPath noise = model.draw_noise(noise_seeds[s]);
      const Model::Forward fw =
          model.forward(tape, bound, x, noise, with_kl);
      const NodeId ll = tape.label_logprob_sum(fw.logits, y);
      NodeId term = tape.scale(ll, dataset_scale);
      if (with_kl && kappa != 0.0)
        term = tape.sub(term, tape.scale(fw.kl, kappa));

      out.loglik_scaled += tape.value(ll).data[0] * dataset_scale;
      if (with_kl) out.kl += tape.value(fw.kl).data[0];
      const Tensor probs = softmax_rows(tape.value(fw.logits));
      kernels::active().axpy(1.0, probs.data.data(),
                             out.probs_sum.data.data(), probs.numel());
      total = s == 0 ? term : tape.add(total, term);
    }

    if (with_grads) {
      const NodeId loss =
          tape.scale(total, -1.0 / static_cast<double>(noise_seeds.size()));
      if (!std::isfinite(tape.value(loss).data[0]))
        throw NumericsError("non-finite loss", model.schedule().num_steps);
      const auto adj = tape.backward(loss);
      out.grads.reserve(bound.leaves.size());
      for (const auto& [name, id] : bound.leaves) {
        if (adj[id.v].numel() > 0)
          out.grads.push_back(adj[id.v]);
        else
          out.grads.push_back(Tensor::zeros(tape.value(id).shape));
      }
    }
  } catch (...) {
    out.error = std::current_exception();
  }
}

}  // namespace

ElboBreakdown elbo(const Model& model, ParamStore& store,
                   const Tensor& x_batch, const std::vector<int>& labels,
                   double dataset_scale, double kappa,
                   const std::vector<std::uint64_t>& noise_seeds,
                   bool with_grads, std::size_t threads, Tensor* mean_probs) {
  if (noise_seeds.empty())
    throw ContractError("elbo: need at least one posterior sample");
  if (x_batch.rank() != 2 || x_batch.shape[0] == 0)
    throw ContractError("elbo: empty batch");
  if (labels.size() != x_batch.shape[0])
    throw ShapeError("elbo: label count does not match batch");

  const std::size_t batch = x_batch.shape[0];
  const std::size_t shards = std::max<std::size_t>(
      1, std::min(threads == 0 ? 1 : threads, batch));

  std::vector<ShardTask> tasks(shards);
  const std::size_t base = batch / shards, rem = batch % shards;
  std::size_t row = 0;
  for (std::size_t i = 0; i < shards; ++i) {
    tasks[i].row_begin = row;
    tasks[i].row_count = base + (i < rem ? 1 : 0);
    tasks[i].owns_kl = (i == 0);
    row += tasks[i].row_count;
  }

  std::vector<ShardResult> results(shards);
  if (shards == 1) {
    elbo_shard(model, store, x_batch, labels, dataset_scale, kappa,
               noise_seeds, with_grads, tasks[0], results[0]);
  } else {
    std::vector<std::thread> pool;
    pool.reserve(shards);
    for (std::size_t i = 0; i < shards; ++i)
      pool.emplace_back(elbo_shard, std::cref(model), std::cref(store),
                        std::cref(x_batch), std::cref(labels), dataset_scale,
                        kappa, std::cref(noise_seeds), with_grads,
                        std::cref(tasks[i]), std::ref(results[i]));
    for (auto& t : pool) t.join();
  }
  for (auto& r : results)
    if (r.error) std::rethrow_exception(r.error);

  const double inv_samples = 1.0 / static_cast<double>(noise_seeds.size());
  ElboBreakdown bd;
  bd.kappa = kappa;
  bd.num_posterior_samples = noise_seeds.size();
  for (const auto& r : results) bd.log_likelihood += r.loglik_scaled;
  bd.log_likelihood *= inv_samples;
  bd.kl_integral = results[0].kl * inv_samples;
  bd.elbo = bd.log_likelihood - kappa * bd.kl_integral;
  if (!std::isfinite(bd.elbo))
    throw NumericsError("non-finite ELBO", model.schedule().num_steps);

  if (with_grads) {
    // fixed shard order keeps accumulation deterministic per thread count
    for (std::size_t i = 0; i < shards; ++i) {
      std::size_t slot = 0;
      for (auto& s : store.slots()) {
        kernels::active().axpy(1.0, results[i].grads[slot].data.data(),
                               s.grad.data.data(), s.grad.numel());
        ++slot;
      }
    }
  }
  if (mean_probs) {
    *mean_probs = Tensor::zeros({batch, model.spec().num_classes});
    for (const auto& t : tasks) {
      const auto& r = results[&t - tasks.data()];
      for (std::size_t i = 0; i < t.row_count * model.spec().num_classes; ++i)
        mean_probs->data[t.row_begin * model.spec().num_classes + i] =
            r.probs_sum.data[i] * inv_samples;
    }
  }
  return bd;
}

Tensor predict_with_seeds(const Model& model, const ParamStore& store,
                          const Tensor& x_batch,
                          const std::vector<std::uint64_t>& seeds) {
  if (seeds.empty()) throw ContractError("predict: num_samples must be >= 1");
  Tensor acc = Tensor::zeros({x_batch.shape[0], model.spec().num_classes});
  for (const std::uint64_t s : seeds) {
    Tape tape;
    const Model::Bound bound = model.bind(tape, store);
    const BrownianPath noise = model.draw_noise(s);
    const Model::Forward fw =
        model.forward(tape, bound, x_batch, noise, /*with_kl=*/false);
    const Tensor probs = softmax_rows(tape.value(fw.logits));
    kernels::active().axpy(1.0, probs.data.data(), acc.data.data(),
                           acc.numel());
  }
  kernels::active().scale(acc.data.data(),
                          1.0 / static_cast<double>(seeds.size()),
                          acc.data.data(), acc.numel());
  return acc;
}

Tensor predict(const Model& model, const ParamStore& store,
               const Tensor& x_batch, std::size_t num_samples,
               std::uint64_t seed) {
  return predict_with_seeds(model, store, x_batch,
                            derive_seeds(seed, num_samples));
}

std::vector<KlDiagnosisRow> kl_diagnose(
    double sigma_q, double sigma_p,
    const std::function<double(double, double)>& f_q,
    const std::function<double(double, double)>& f_p,
    const std::vector<std::size_t>& steps_list) {
  if (sigma_p <= 0.0) throw ContractError("kl_diagnose: sigma_p must be > 0");
  for (std::size_t i = 1; i < steps_list.size(); ++i)
    if (steps_list[i] <= steps_list[i - 1])
      throw ContractError("kl_diagnose: steps_list must be increasing");

  const double rho = (sigma_q * sigma_q) / (sigma_p * sigma_p);
  const double diffusion_term = 0.5 * (rho - 1.0) - 0.5 * std::log(rho);

  std::vector<KlDiagnosisRow> rows;
  rows.reserve(steps_list.size());
  for (const std::size_t n : steps_list) {
    const double dt = 1.0 / static_cast<double>(n);
    double w = 0.0;
    double kl = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double t = static_cast<double>(i) * dt;
      const double fq = f_q(t, w);
      const double gap = fq - f_p(t, w);
      kl += gap * gap / (2.0 * sigma_p * sigma_p) * dt + diffusion_term;
      w += fq * dt;  // noise-free posterior skeleton
    }
    rows.push_back({n, kl, kl / static_cast<double>(n)});
  }
  return rows;
}

TrainResult train(const Model& model, ParamStore& store, const Dataset& data,
                  const TrainConfig& cfg,
                  const std::function<void(const TrainLogRow&)>& on_epoch) {
  const Tensor x_train = data.features_of(Split::kTrain);
  const std::vector<int> y_train = data.labels_of(Split::kTrain);
  const Tensor x_val = data.features_of(Split::kVal);
  const std::vector<int> y_val = data.labels_of(Split::kVal);
  const std::size_t n_train = x_train.shape[0];
  if (n_train == 0) throw ContractError("train: empty train split");
  const bool have_val = x_val.shape[0] > 0;

  std::mt19937_64 rng(cfg.seed);
  TrainResult result;
  result.best_params = store;
  result.best_metric = -1.0;
  result.best_epoch = 0;

  std::vector<std::size_t> order(n_train);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    const auto tic = std::chrono::steady_clock::now();
    TrainLogRow row;
    row.epoch = epoch;
    std::shuffle(order.begin(), order.end(), rng);

    double elbo_sum = 0.0, ll_sum = 0.0, kl_sum = 0.0;
    std::size_t batches = 0, correct = 0, seen = 0;
    Tensor epoch_probs = Tensor::zeros({n_train, model.spec().num_classes});
    std::vector<int> epoch_labels(n_train, 0);

    try {
      for (std::size_t start = 0; start < n_train; start += cfg.batch_size) {
        const std::size_t bs = std::min(cfg.batch_size, n_train - start);
        Tensor xb = Tensor::zeros({bs, x_train.shape[1]});
        std::vector<int> yb(bs);
        for (std::size_t i = 0; i < bs; ++i) {
          const std::size_t src = order[start + i];
          std::memcpy(xb.data.data() + i * x_train.shape[1],
                      x_train.data.data() + src * x_train.shape[1],
                      x_train.shape[1] * sizeof(double));
          yb[i] = y_train[src];
        }
        std::vector<std::uint64_t> seeds(cfg.num_posterior_samples);
        for (auto& s : seeds) s = rng();

        const double scale =
            static_cast<double>(n_train) / static_cast<double>(bs);
        store.zero_grads();
        Tensor probs;
        const ElboBreakdown bd =
            elbo(model, store, xb, yb, scale, cfg.kappa, seeds,
                 /*with_grads=*/true, cfg.threads, &probs);
        store.clip_grad_norm(cfg.grad_clip);
        store.adam_step(cfg.lr);

        elbo_sum += bd.elbo;
        ll_sum += bd.log_likelihood;
        kl_sum += bd.kl_integral;
        ++batches;
        for (std::size_t i = 0; i < bs; ++i) {
          std::size_t best = 0;
          for (std::size_t c = 1; c < model.spec().num_classes; ++c)
            if (probs.at(i, c) > probs.at(i, best)) best = c;
          correct += (static_cast<int>(best) == yb[i]);
          std::memcpy(epoch_probs.data.data() +
                          (seen + i) * model.spec().num_classes,
                      probs.data.data() + i * model.spec().num_classes,
                      model.spec().num_classes * sizeof(double));
          epoch_labels[seen + i] = yb[i];
        }
        seen += bs;
      }
    } catch (const NumericsError&) {
      // abort the epoch, fall back to the best checkpoint so far
      store = result.best_params;
      row.numerics_event = true;
    }

    if (batches > 0) {
      row.elbo = elbo_sum / static_cast<double>(batches);
      row.log_lik = ll_sum / static_cast<double>(batches);
      row.kl = kl_sum / static_cast<double>(batches);
    }
    row.train_accuracy =
        seen > 0 ? static_cast<double>(correct) / static_cast<double>(seen)
                 : 0.0;

    if (have_val) {
      const Tensor probs =
          predict(model, store, x_val, cfg.val_samples, cfg.seed + epoch);
      PredictionSet ps{probs, y_val, "ID"};
      row.val_accuracy = accuracy(ps);
      row.val_ece = ece(ps, cfg.ece_bins);
    } else if (seen > 0) {
      // no validation split: train-pass predictions stand in
      Tensor probs = take_rows(epoch_probs, 0, seen);
      PredictionSet ps{std::move(probs),
                       std::vector<int>(epoch_labels.begin(),
                                        epoch_labels.begin() + seen),
                       "ID"};
      row.val_accuracy = row.train_accuracy;
      row.val_ece = ece(ps, cfg.ece_bins);
    }

    row.epoch_secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - tic)
            .count();
    if (!row.numerics_event && row.val_accuracy > result.best_metric) {
      result.best_metric = row.val_accuracy;
      result.best_epoch = epoch;
      result.best_params = store;
    }
    result.log.push_back(row);
    if (on_epoch) on_epoch(row);
    if (cfg.target_val_accuracy > 0.0 && !row.numerics_event &&
        row.val_accuracy >= cfg.target_val_accuracy)
      break;
  }
  return result;
}

void write_train_log_csv(std::ostream& os,
                         const std::vector<TrainLogRow>& log) {
  os << "epoch,elbo,log_lik,kl,train_accuracy,val_accuracy,val_ece,"
        "epoch_secs,numerics_event\n";
  const auto prev = os.precision(12);
  for (const auto& r : log)
    os << r.epoch << "," << r.elbo << "," << r.log_lik << "," << r.kl << ","
       << r.train_accuracy << "," << r.val_accuracy << "," << r.val_ece << ","
       << r.epoch_secs << "," << (r.numerics_event ? 1 : 0) << "\n";
  os.precision(prev);
}

namespace {

constexpr char kCheckpointMagic[8] = {'P', 'S', 'D', 'E', 'B', 'N', 'N', 'C'};
constexpr std::uint32_t kCheckpointVersion = 1;

template <typename T>
void write_pod(std::ostream& os, const T& v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
void read_pod(std::istream& is, T& v, std::size_t offset, const char* what) {
  is.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!is) throw FormatError(std::string("truncated checkpoint reading ") + what,
                             offset);
}

}  // namespace

void save_checkpoint(const std::string& path, const Model& model,
                     const ParamStore& params) {
  nlohmann::json meta;
  meta["model"] = model.spec();
  meta["schedule"] = model.schedule();
  meta["sigma"] = model.sigma();
  meta["adam_steps"] = params.adam_steps();
  nlohmann::json plist = nlohmann::json::array();
  for (const auto& s : params.slots())
    plist.push_back({{"name", s.name}, {"shape", s.value.shape}});
  meta["params"] = plist;
  const std::string meta_str = meta.dump();

  std::ofstream os(path, std::ios::binary);
  if (!os) throw FormatError("cannot write checkpoint '" + path + "'", 0);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  write_pod(os, kCheckpointVersion);
  write_pod(os, kFlattenOrderVersion);
  write_pod(os, static_cast<std::uint64_t>(meta_str.size()));
  os.write(meta_str.data(), static_cast<std::streamsize>(meta_str.size()));
  for (const auto& s : params.slots()) {
    const auto bytes = static_cast<std::streamsize>(s.value.numel() *
                                                    sizeof(double));
    os.write(reinterpret_cast<const char*>(s.value.data.data()), bytes);
    os.write(reinterpret_cast<const char*>(s.adam_m.data.data()), bytes);
    os.write(reinterpret_cast<const char*>(s.adam_v.data.data()), bytes);
  }
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw FormatError("cannot open checkpoint '" + path + "'", 0);

  char magic[8];
  is.read(magic, sizeof(magic));
  if (!is || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0)
    throw FormatError("not a checkpoint file (bad magic)", 0);
  std::uint32_t version = 0, flatten = 0;
  read_pod(is, version, 8, "version");
  if (version != kCheckpointVersion)
    throw FormatError("unsupported checkpoint version " +
                      std::to_string(version), 8);
  read_pod(is, flatten, 12, "flatten order version");
  if (flatten != kFlattenOrderVersion)
    throw FormatError("incompatible parameter flattening order " +
                      std::to_string(flatten), 12);
  std::uint64_t meta_len = 0;
  read_pod(is, meta_len, 16, "metadata length");
  std::string meta_str(meta_len, '\0');
  is.read(meta_str.data(), static_cast<std::streamsize>(meta_len));
  if (!is) throw FormatError("truncated checkpoint metadata", 24);

  Checkpoint ck;
  std::size_t offset = 24 + meta_len;
  try {
    const nlohmann::json meta = nlohmann::json::parse(meta_str);
    ck.model = meta.at("model").get<ModelSpec>();
    ck.schedule = meta.at("schedule").get<RegimeSchedule>();
    ck.sigma = meta.at("sigma").get<double>();
    ck.params.set_adam_steps(meta.at("adam_steps").get<std::int64_t>());
    for (const auto& p : meta.at("params")) {
      const auto name = p.at("name").get<std::string>();
      const auto shape = p.at("shape").get<std::vector<std::size_t>>();
      ck.params.add(name, Tensor::zeros(shape));
      auto& slot = ck.params.slots().back();
      const auto bytes =
          static_cast<std::streamsize>(slot.value.numel() * sizeof(double));
      is.read(reinterpret_cast<char*>(slot.value.data.data()), bytes);
      is.read(reinterpret_cast<char*>(slot.adam_m.data.data()), bytes);
      is.read(reinterpret_cast<char*>(slot.adam_v.data.data()), bytes);
      if (!is) throw FormatError("truncated checkpoint payload", offset);
      offset += 3 * slot.value.numel() * sizeof(double);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad checkpoint metadata: ") + e.what(), 24);
  }
  return ck;
}

}  // namespace psdebnn
