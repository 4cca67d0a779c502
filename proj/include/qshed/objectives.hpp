#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "qshed/matrix.hpp"

namespace qshed {

struct Dataset {
  std::vector<std::vector<double>> features;  // one row per sample
  std::vector<double> labels;

  int size() const { return static_cast<int>(features.size()); }
  int dim() const { return features.empty() ? 0 : static_cast<int>(features.front().size()); }
};

// Rows are "x_1,...,x_n,label"; a non-numeric first line is treated as a
// header and skipped.
Dataset load_csv(const std::string& path);

Dataset pool(const std::vector<Dataset>& parts);

enum class ObjectiveKind { kLeastSquares, kLogistic };

ObjectiveKind objective_from_string(const std::string& name);
std::string to_string(ObjectiveKind kind);

// Regularized empirical risk over one dataset. Logistic labels live in
// {-1, +1}; a 0 label is read as -1.
class Objective {
public:
  Objective(ObjectiveKind kind, Dataset data, double l2);

  int dim() const { return data_.dim(); }
  int samples() const { return data_.size(); }
  ObjectiveKind kind() const { return kind_; }
  double l2() const { return l2_; }
  const Dataset& data() const { return data_; }

  double value(std::span<const double> theta) const;
  std::vector<double> gradient(std::span<const double> theta) const;
  SymmetricMatrix hessian(std::span<const double> theta) const;

private:
  ObjectiveKind kind_;
  Dataset data_;
  double l2_;
};

struct SyntheticSpec {
  int devices = 1;
  int samples_per_device = 256;
  int dim = 8;
  ObjectiveKind kind = ObjectiveKind::kLeastSquares;
  double condition = 50.0;     // ratio of extreme covariance eigenvalues
  double noise = 0.1;          // label noise scale (least squares only)
  double feature_shift = 0.0;  // per-device mean offset magnitude
  double label_skew = 0.0;     // per-device logit offset magnitude (logistic)
  std::uint64_t seed = 1;
};

// Gaussian features with a geometric covariance spectrum turned by a random
// rotation, so covariance eigenvectors are never axis-aligned. Labels come
// from a shared ground-truth parameter; heterogeneity enters through
// per-device feature shifts and label skew.
std::vector<Dataset> generate_synthetic(const SyntheticSpec& spec);

}  // namespace qshed
