// SPDX-License-Identifier: Apache-2.0

#include "psdebnn/data.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <istream>
#include <numeric>
#include <ostream>
#include <random>
#include <sstream>

#include "psdebnn/errors.hpp"

namespace psdebnn {

OodKind ood_kind_from_string(const std::string& s) {
  if (s == "uniform_noise") return OodKind::kUniformNoise;
  if (s == "gaussian_noise") return OodKind::kGaussianNoise;
  if (s == "shifted") return OodKind::kShifted;
  throw ConfigError("unknown OOD kind '" + s + "'");
}

std::string to_string(OodKind k) {
  switch (k) {
    case OodKind::kUniformNoise: return "uniform_noise";
    case OodKind::kGaussianNoise: return "gaussian_noise";
    case OodKind::kShifted: return "shifted";
  }
  return "?";
}

std::vector<std::size_t> Dataset::indices_of(Split s) const {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < split.size(); ++i)
    if (split[i] == s) idx.push_back(i);
  return idx;
}

Tensor Dataset::features_of(Split s) const {
  const auto idx = indices_of(s);
  Tensor out = Tensor::zeros({idx.size(), dim()});
  for (std::size_t r = 0; r < idx.size(); ++r)
    for (std::size_t c = 0; c < dim(); ++c)
      out.at(r, c) = features.at(idx[r], c);
  return out;
}

std::vector<int> Dataset::labels_of(Split s) const {
  const auto idx = indices_of(s);
  std::vector<int> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(labels[i]);
  return out;
}

void assign_splits(Dataset& ds, double val_fraction, double test_fraction,
                   std::uint64_t seed) {
  if (val_fraction < 0.0 || test_fraction < 0.0 ||
      val_fraction + test_fraction >= 1.0)
    throw ConfigError("split fractions must be nonnegative and sum below 1");
  const std::size_t n = ds.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);

  const auto n_val = static_cast<std::size_t>(std::floor(val_fraction * n));
  const auto n_test = static_cast<std::size_t>(std::floor(test_fraction * n));
  ds.split.assign(n, Split::kTrain);
  for (std::size_t i = 0; i < n_val; ++i) ds.split[order[i]] = Split::kVal;
  for (std::size_t i = n_val; i < n_val + n_test; ++i)
    ds.split[order[i]] = Split::kTest;
}

void normalize_with_train_stats(Dataset& ds) {
  if (ds.normalized) throw ContractError("dataset already normalized");
  const std::size_t d = ds.dim();
  const auto train_idx = ds.indices_of(Split::kTrain);
  if (train_idx.empty()) throw ContractError("normalize: empty train split");

  ds.feat_mean = Tensor::zeros({d});
  ds.feat_std = Tensor::zeros({d});
  for (std::size_t i : train_idx)
    for (std::size_t c = 0; c < d; ++c) ds.feat_mean[c] += ds.features.at(i, c);
  for (std::size_t c = 0; c < d; ++c)
    ds.feat_mean[c] /= static_cast<double>(train_idx.size());
  for (std::size_t i : train_idx)
    for (std::size_t c = 0; c < d; ++c) {
      const double dlt = ds.features.at(i, c) - ds.feat_mean[c];
      ds.feat_std[c] += dlt * dlt;
    }
  for (std::size_t c = 0; c < d; ++c) {
    ds.feat_std[c] = std::sqrt(ds.feat_std[c] /
                               static_cast<double>(train_idx.size()));
    if (ds.feat_std[c] < 1e-12) ds.feat_std[c] = 1.0;  // constant feature
  }
  for (std::size_t i = 0; i < ds.size(); ++i)
    for (std::size_t c = 0; c < d; ++c)
      ds.features.at(i, c) =
          (ds.features.at(i, c) - ds.feat_mean[c]) / ds.feat_std[c];
  ds.normalized = true;
}

Dataset gen_two_moons(std::size_t n, double noise_std, std::uint64_t seed) {
  if (n % 2 != 0) throw ConfigError("gen_two_moons: n must be even");
  const std::size_t half = n / 2;
  Dataset ds;
  ds.features = Tensor::zeros({n, 2});
  ds.labels.resize(n);
  ds.split.assign(n, Split::kTrain);
  ds.num_classes = 2;

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> jitter(0.0, noise_std);
  constexpr double kPi = 3.14159265358979323846;
  for (std::size_t i = 0; i < half; ++i) {
    const double t = kPi * static_cast<double>(i) /
                     static_cast<double>(half > 1 ? half - 1 : 1);
    ds.features.at(i, 0) = std::cos(t);
    ds.features.at(i, 1) = std::sin(t);
    ds.labels[i] = 0;
    ds.features.at(half + i, 0) = 1.0 - std::cos(t);
    ds.features.at(half + i, 1) = 0.5 - std::sin(t);
    ds.labels[half + i] = 1;
  }
  if (noise_std > 0.0)
    for (double& v : ds.features.data) v += jitter(rng);
  return ds;
}

Dataset gen_annulus(std::size_t n_per_class, double r1, double r2, double r3,
                    std::uint64_t seed, std::size_t d_x) {
  if (!(0.0 < r1 && r1 < r2 && r2 < r3))
    throw ConfigError("gen_annulus: need 0 < r1 < r2 < r3");
  const std::size_t n = 2 * n_per_class;
  Dataset ds;
  ds.features = Tensor::zeros({n, d_x});
  ds.labels.resize(n);
  ds.split.assign(n, Split::kTrain);
  ds.num_classes = 2;

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  auto sample_in = [&](double lo, double hi, double* row) {
    // rejection from the bounding cube of the outer radius
    while (true) {
      double sq = 0.0;
      for (std::size_t c = 0; c < d_x; ++c) {
        row[c] = hi * unit(rng);
        sq += row[c] * row[c];
      }
      const double r = std::sqrt(sq);
      if (r >= lo && r <= hi) return;
    }
  };
  for (std::size_t i = 0; i < n_per_class; ++i) {
    sample_in(0.0, r1, ds.features.data.data() + i * d_x);
    ds.labels[i] = 0;
  }
  for (std::size_t i = 0; i < n_per_class; ++i) {
    sample_in(r2, r3, ds.features.data.data() + (n_per_class + i) * d_x);
    ds.labels[n_per_class + i] = 1;
  }
  return ds;
}

namespace {

std::uint32_t read_be32(const std::vector<unsigned char>& buf,
                        std::size_t off, const char* what) {
  if (off + 4 > buf.size())
    throw FormatError(std::string("truncated IDX file reading ") + what, off);
  return (static_cast<std::uint32_t>(buf[off]) << 24) |
         (static_cast<std::uint32_t>(buf[off + 1]) << 16) |
         (static_cast<std::uint32_t>(buf[off + 2]) << 8) |
         static_cast<std::uint32_t>(buf[off + 3]);
}

std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open '" + path + "'", 0);
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(f),
                                    std::istreambuf_iterator<char>());
}

}  // namespace

Dataset load_mnist_idx(const std::string& images_path,
                       const std::string& labels_path, std::size_t subset,
                       std::uint64_t seed) {
  const auto img = read_file(images_path);
  const auto lab = read_file(labels_path);

  if (read_be32(img, 0, "image magic") != 0x00000803u)
    throw FormatError("bad IDX image magic in '" + images_path + "'", 0);
  if (read_be32(lab, 0, "label magic") != 0x00000801u)
    throw FormatError("bad IDX label magic in '" + labels_path + "'", 0);

  const std::size_t n_img = read_be32(img, 4, "image count");
  const std::size_t rows = read_be32(img, 8, "row count");
  const std::size_t cols = read_be32(img, 12, "column count");
  const std::size_t n_lab = read_be32(lab, 4, "label count");
  if (n_img != n_lab)
    throw FormatError("image/label counts disagree", 4);
  const std::size_t pixels = rows * cols;
  if (16 + n_img * pixels > img.size())
    throw FormatError("truncated IDX image payload", img.size());
  if (8 + n_lab > lab.size())
    throw FormatError("truncated IDX label payload", lab.size());

  // stratified subset: per-class targets proportional to class frequency
  std::vector<std::vector<std::size_t>> by_class(10);
  for (std::size_t i = 0; i < n_lab; ++i) {
    const unsigned char y = lab[8 + i];
    if (y > 9) throw FormatError("label out of range", 8 + i);
    by_class[y].push_back(i);
  }
  std::size_t take = std::min(subset == 0 ? n_img : subset, n_img);
  std::mt19937_64 rng(seed);
  std::vector<std::size_t> chosen;
  if (take == n_img) {
    chosen.resize(n_img);
    std::iota(chosen.begin(), chosen.end(), 0);
  } else {
    std::vector<std::size_t> want(10, 0);
    std::size_t assigned = 0;
    std::vector<double> frac(10, 0.0);
    for (int c = 0; c < 10; ++c) {
      const double ideal = static_cast<double>(take) *
                           static_cast<double>(by_class[c].size()) /
                           static_cast<double>(n_img);
      want[c] = static_cast<std::size_t>(std::floor(ideal));
      frac[c] = ideal - static_cast<double>(want[c]);
      assigned += want[c];
    }
    while (assigned < take) {
      int best = 0;
      for (int c = 1; c < 10; ++c)
        if (frac[c] > frac[best]) best = c;
      ++want[best];
      frac[best] = -1.0;
      ++assigned;
    }
    for (int c = 0; c < 10; ++c) {
      auto& pool = by_class[c];
      std::shuffle(pool.begin(), pool.end(), rng);
      const std::size_t k = std::min(want[c], pool.size());
      chosen.insert(chosen.end(), pool.begin(), pool.begin() + k);
    }
    std::sort(chosen.begin(), chosen.end());
  }

  Dataset ds;
  ds.features = Tensor::zeros({chosen.size(), pixels});
  ds.labels.resize(chosen.size());
  ds.split.assign(chosen.size(), Split::kTrain);
  ds.num_classes = 10;
  for (std::size_t r = 0; r < chosen.size(); ++r) {
    const std::size_t i = chosen[r];
    ds.labels[r] = lab[8 + i];
    const unsigned char* px = img.data() + 16 + i * pixels;
    for (std::size_t c = 0; c < pixels; ++c)
      ds.features.at(r, c) = static_cast<double>(px[c]) / 255.0;
  }
  return ds;
}

Dataset gen_ood(std::size_t n, std::size_t d_x, OodKind kind,
                std::uint64_t seed) {
  Dataset ds;
  ds.features = Tensor::zeros({n, d_x});
  ds.split.assign(n, Split::kTest);
  ds.source = "OOD";
  ds.num_classes = 0;
  std::mt19937_64 rng(seed);
  switch (kind) {
    case OodKind::kUniformNoise: {
      std::uniform_real_distribution<double> u(0.0, 1.0);
      for (double& v : ds.features.data) v = u(rng);
      break;
    }
    case OodKind::kGaussianNoise: {
      std::normal_distribution<double> g(0.0, 1.0);
      for (double& v : ds.features.data) v = g(rng);
      break;
    }
    case OodKind::kShifted: {
      // unit Gaussian displaced well off the standardized data cloud
      std::normal_distribution<double> g(2.0, 1.0);
      for (double& v : ds.features.data) v = g(rng);
      break;
    }
  }
  return ds;
}

void save_dataset_csv(const Dataset& ds, std::ostream& os) {
  os << "label";
  for (std::size_t c = 1; c <= ds.dim(); ++c) os << ",x_" << c;
  os << "\n";
  const auto prev = os.precision(17);
  for (std::size_t i = 0; i < ds.size(); ++i) {
    os << (ds.labels.empty() ? -1 : ds.labels[i]);
    for (std::size_t c = 0; c < ds.dim(); ++c)
      os << "," << ds.features.at(i, c);
    os << "\n";
  }
  os.precision(prev);
}

Dataset load_dataset_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line))
    throw FormatError("empty dataset CSV", 0);
  std::size_t dim = 0;
  for (char ch : line) dim += (ch == ',');

  Dataset ds;
  std::vector<double> values;
  std::vector<int> labels;
  std::size_t rows = 0;
  bool any_label = false;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    if (!std::getline(ss, cell, ','))
      throw FormatError("malformed dataset CSV row", rows + 1);
    const int y = std::stoi(cell);
    labels.push_back(y);
    any_label = any_label || y >= 0;
    std::size_t got = 0;
    while (std::getline(ss, cell, ',')) {
      values.push_back(std::stod(cell));
      ++got;
    }
    if (got != dim)
      throw FormatError("dataset CSV row with wrong column count", rows + 1);
    ++rows;
  }
  ds.features = Tensor({rows, dim}, std::move(values));
  if (any_label) {
    ds.labels = std::move(labels);
    int mx = 0;
    for (int y : ds.labels) mx = std::max(mx, y);
    ds.num_classes = static_cast<std::size_t>(mx) + 1;
  }
  ds.split.assign(rows, Split::kTrain);
  return ds;
}

}  // namespace psdebnn
