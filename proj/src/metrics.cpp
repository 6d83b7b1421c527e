// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "psdebnn/errors.hpp"

namespace psdebnn {

void PredictionSet::validate() const {
  if (probs.rank() != 2) throw ShapeError("PredictionSet: probs must be (N,C)");
  const std::size_t n = size(), c = num_classes();
  if (!labels.empty() && labels.size() != n)
    throw ShapeError("PredictionSet: label count mismatch");
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double p = probs.at(i, j);
      if (p < 0.0) throw ContractError("PredictionSet: negative probability");
      total += p;
    }
    if (std::fabs(total - 1.0) > 1e-9)
      throw ContractError("PredictionSet: row does not sum to 1");
  }
}

namespace {

std::size_t argmax_lowest_tie(const Tensor& probs, std::size_t row) {
  const std::size_t c = probs.shape[1];
  std::size_t best = 0;
  for (std::size_t j = 1; j < c; ++j)
    if (probs.at(row, j) > probs.at(row, best)) best = j;
  return best;
}

}  // namespace

double accuracy(const PredictionSet& preds) {
  if (preds.size() == 0) throw ContractError("accuracy: empty prediction set");
  if (preds.labels.empty()) throw ContractError("accuracy: labels required");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < preds.size(); ++i)
    if (argmax_lowest_tie(preds.probs, i) ==
        static_cast<std::size_t>(preds.labels[i]))
      ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

double ece(const PredictionSet& preds, std::size_t num_bins) {
  if (preds.size() == 0) throw ContractError("ece: empty prediction set");
  if (preds.labels.empty()) throw ContractError("ece: labels required");
  if (num_bins < 1) throw ContractError("ece: num_bins must be >= 1");

  std::vector<double> conf_sum(num_bins, 0.0);
  std::vector<double> acc_sum(num_bins, 0.0);
  std::vector<std::size_t> count(num_bins, 0);
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const std::size_t pred = argmax_lowest_tie(preds.probs, i);
    const double conf = preds.probs.at(i, pred);
    std::size_t b = static_cast<std::size_t>(conf * num_bins);
    if (b >= num_bins) b = num_bins - 1;  // confidence exactly 1.0
    conf_sum[b] += conf;
    acc_sum[b] += (pred == static_cast<std::size_t>(preds.labels[i])) ? 1.0 : 0.0;
    ++count[b];
  }
  double e = 0.0;
  const double n = static_cast<double>(preds.size());
  for (std::size_t b = 0; b < num_bins; ++b) {
    if (count[b] == 0) continue;
    const double cb = static_cast<double>(count[b]);
    e += (cb / n) * std::fabs(acc_sum[b] / cb - conf_sum[b] / cb);
  }
  return e;
}

double predictive_entropy(const std::vector<double>& p) {
  double h = 0.0;
  for (double v : p)
    if (v > 0.0) h -= v * std::log(v);
  return h;
}

std::vector<double> predictive_entropies(const Tensor& probs) {
  if (probs.rank() != 2) throw ShapeError("predictive_entropies: (N,C) input");
  std::vector<double> out(probs.shape[0]);
  for (std::size_t i = 0; i < probs.shape[0]; ++i) {
    double h = 0.0;
    for (std::size_t j = 0; j < probs.shape[1]; ++j) {
      const double v = probs.at(i, j);
      if (v > 0.0) h -= v * std::log(v);
    }
    out[i] = h;
  }
  return out;
}

RocResult roc_auc(const std::vector<double>& id_scores,
                  const std::vector<double>& ood_scores) {
  if (id_scores.empty() || ood_scores.empty())
    throw ContractError("roc_auc: both score sets must be nonempty");

  // Mann–Whitney via average ranks over the pooled sample
  struct Entry {
    double score;
    bool ood;
  };
  std::vector<Entry> pool;
  pool.reserve(id_scores.size() + ood_scores.size());
  for (double s : id_scores) pool.push_back({s, false});
  for (double s : ood_scores) pool.push_back({s, true});
  std::sort(pool.begin(), pool.end(),
            [](const Entry& a, const Entry& b) { return a.score < b.score; });

  double ood_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < pool.size()) {
    std::size_t j = i;
    while (j < pool.size() && pool[j].score == pool[i].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // 1-based
    for (std::size_t k = i; k < j; ++k)
      if (pool[k].ood) ood_rank_sum += avg_rank;
    i = j;
  }
  const double m = static_cast<double>(ood_scores.size());
  const double n = static_cast<double>(id_scores.size());
  const double u = ood_rank_sum - m * (m + 1.0) / 2.0;

  RocResult res;
  res.auc = u / (m * n);

  // ROC sweep: descending thresholds at each distinct score
  std::vector<double> thresholds;
  for (std::size_t k = pool.size(); k-- > 0;)
    if (thresholds.empty() || pool[k].score != thresholds.back())
      thresholds.push_back(pool[k].score);
  res.points.push_back({0.0, 0.0});
  for (double thr : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (double s : ood_scores) tp += (s >= thr);
    for (double s : id_scores) fp += (s >= thr);
    res.points.push_back({static_cast<double>(fp) / n,
                          static_cast<double>(tp) / m});
  }
  res.points.push_back({1.0, 1.0});
  return res;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows) {
  os << "metric,value,split\n";
  const auto prev = os.precision(12);
  for (const auto& r : rows)
    os << r.metric << "," << r.value << "," << r.split << "\n";
  os.precision(prev);
}

void write_entropy_histogram_csv(std::ostream& os,
                                 const std::vector<double>& id_entropies,
                                 const std::vector<double>& ood_entropies,
                                 std::size_t num_bins) {
  double lo = 0.0, hi = 0.0;
  for (const auto* v : {&id_entropies, &ood_entropies})
    for (double s : *v) {
      lo = std::min(lo, s);
      hi = std::max(hi, s);
    }
  if (hi <= lo) hi = lo + 1.0;
  const double width = (hi - lo) / static_cast<double>(num_bins);

  auto bin_of = [&](double s) {
    std::size_t b = static_cast<std::size_t>((s - lo) / width);
    return b >= num_bins ? num_bins - 1 : b;
  };
  std::vector<std::size_t> id_count(num_bins, 0), ood_count(num_bins, 0);
  for (double s : id_entropies) ++id_count[bin_of(s)];
  for (double s : ood_entropies) ++ood_count[bin_of(s)];

  os << "bin_left,bin_right,count,source\n";
  const auto prev = os.precision(12);
  for (std::size_t b = 0; b < num_bins; ++b) {
    const double l = lo + width * static_cast<double>(b);
    const double r = lo + width * static_cast<double>(b + 1);
    os << l << "," << r << "," << id_count[b] << ",ID\n";
    os << l << "," << r << "," << ood_count[b] << ",OOD\n";
  }
  os.precision(prev);
}

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw ShapeError("softmax_rows: (N,C) input");
  Tensor out = Tensor::zeros(logits.shape);
  const std::size_t n = logits.shape[0], c = logits.shape[1];
  for (std::size_t i = 0; i < n; ++i) {
    double mx = logits.at(i, 0);
    for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
    double z = 0.0;
    for (std::size_t j = 0; j < c; ++j) z += std::exp(logits.at(i, j) - mx);
    for (std::size_t j = 0; j < c; ++j)
      out.at(i, j) = std::exp(logits.at(i, j) - mx) / z;
  }
  return out;
}

}  // namespace psdebnn
