// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "psdebnn/tensor.hpp"

namespace psdebnn {

enum class Split { kTrain, kVal, kTest };

enum class OodKind { kUniformNoise, kGaussianNoise, kShifted };
OodKind ood_kind_from_string(const std::string& s);
std::string to_string(OodKind k);

struct Dataset {
  Tensor features;             // {N, d}
  std::vector<int> labels;     // size N, empty when unlabeled
  std::vector<Split> split;    // size N
  std::size_t num_classes = 0;
  std::string source = "ID";   // "ID" or "OOD"
  // per-feature statistics of the train split, set by normalization
  Tensor feat_mean;
  Tensor feat_std;
  bool normalized = false;

  std::size_t size() const { return features.rank() == 2 ? features.shape[0] : 0; }
  std::size_t dim() const { return features.rank() == 2 ? features.shape[1] : 0; }

  std::vector<std::size_t> indices_of(Split s) const;
  Tensor features_of(Split s) const;
  std::vector<int> labels_of(Split s) const;
};

// Seeded shuffle into disjoint train/val/test; fractions may be zero.
void assign_splits(Dataset& ds, double val_fraction, double test_fraction,
                   std::uint64_t seed);

// Standardizes every feature with mean/std computed on the train split only.
void normalize_with_train_stats(Dataset& ds);

// Two interleaved half-circles with Gaussian jitter; labels balanced n/2.
Dataset gen_two_moons(std::size_t n, double noise_std, std::uint64_t seed);

// Ball-vs-shell task: class 0 uniform in ||x|| <= r1, class 1 uniform in
// r2 <= ||x|| <= r3 (rejection sampling); the gap (r1,r2) is never sampled.
Dataset gen_annulus(std::size_t n_per_class, double r1, double r2, double r3,
                    std::uint64_t seed, std::size_t d_x = 2);

// IDX-format reader (big-endian, magic 0x803 images / 0x801 labels) with a
// seeded stratified subset; pixels scaled to [0,1] and flattened.
Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path, std::size_t subset,
                       std::uint64_t seed);

// Unlabeled OOD samples in the normalized input domain.
Dataset gen_ood(std::size_t n, std::size_t d_x, OodKind kind,
                std::uint64_t seed);

// CSV cache, header label,x_1..x_d (label -1 for unlabeled rows).
void save_dataset_csv(const Dataset& ds, std::ostream& os);
Dataset load_dataset_csv(std::istream& is);

}  // namespace psdebnn
