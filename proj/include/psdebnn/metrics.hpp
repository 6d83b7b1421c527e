// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "psdebnn/tensor.hpp"

namespace psdebnn {

// Per-example class probabilities with optional ground truth. `source`
// tags the set as in-distribution or OOD for reporting.
struct PredictionSet {
  Tensor probs;              // {N, C}
  std::vector<int> labels;   // empty for unlabeled (OOD) sets
  std::string source = "ID";

  std::size_t size() const { return probs.rank() == 2 ? probs.shape[0] : 0; }
  std::size_t num_classes() const {
    return probs.rank() == 2 ? probs.shape[1] : 0;
  }
  // rows nonnegative and summing to 1 within 1e-9
  void validate() const;
};

// Fraction of argmax(p) == label; argmax ties resolve to the lowest class.
double accuracy(const PredictionSet& preds);

// Expected calibration error over equal-width confidence bins on [0,1];
// empty bins contribute nothing.
double ece(const PredictionSet& preds, std::size_t num_bins);

// Shannon entropy in nats, 0*ln(0) := 0.
double predictive_entropy(const std::vector<double>& p);
std::vector<double> predictive_entropies(const Tensor& probs);

struct RocPoint {
  double fpr;
  double tpr;
};

struct RocResult {
  double auc;  // P(ood score > id score), ties counted 1/2
  std::vector<RocPoint> points;
};

// Mann–Whitney AUC of separating OOD from ID by score (higher = OOD).
RocResult roc_auc(const std::vector<double>& id_scores,
                  const std::vector<double>& ood_scores);

// rows `metric,value,split`
struct MetricRow {
  std::string metric;
  double value;
  std::string split;
};
void write_metrics_csv(std::ostream& os, const std::vector<MetricRow>& rows);

// rows `bin_left,bin_right,count,source`, shared equal-width binning over
// the combined score range
void write_entropy_histogram_csv(std::ostream& os,
                                 const std::vector<double>& id_entropies,
                                 const std::vector<double>& ood_entropies,
                                 std::size_t num_bins);

// Row-wise softmax of a logits matrix.
Tensor softmax_rows(const Tensor& logits);

}  // namespace psdebnn
