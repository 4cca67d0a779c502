#include "qshed/objectives.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <sstream>

#include "qshed/errors.hpp"
#include "qshed/rng.hpp"

namespace qshed {

namespace {

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double logistic_loss(double z) { return std::log1p(std::exp(-std::abs(z))) + std::max(-z, 0.0); }

double parse_field(const std::string& field, int line_no) {
  const char* begin = field.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  while (end && *end == ' ') ++end;
  if (end == begin || (end && *end != '\0'))
    throw InvalidInput("csv line " + std::to_string(line_no) + ": bad number '" + field + "'");
  if (!std::isfinite(v))
    throw InvalidInput("csv line " + std::to_string(line_no) + ": non-finite value");
  return v;
}

double normal_draw(SplitMix64& g) {
  // Box-Muller on the library's own uniform stream, so draws are identical
  // across platforms
  double u1 = g.next_unit();
  while (u1 <= 0.0) u1 = g.next_unit();
  const double u2 = g.next_unit();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::vector<double> random_rotation(int n, SplitMix64& g) {
  // dense orthogonal matrix built from Givens rotations applied to I
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  for (int i = 0; i < n; ++i) m[static_cast<std::size_t>(i) * n + i] = 1.0;
  if (n < 2) return m;
  const int rotations = std::min(n * (n - 1) / 2, 64 * n);
  for (int k = 0; k < rotations; ++k) {
    const int i = static_cast<int>(g.next_u64() % static_cast<std::uint64_t>(n));
    int j = static_cast<int>(g.next_u64() % static_cast<std::uint64_t>(n - 1));
    if (j >= i) ++j;
    const double angle = 2.0 * std::numbers::pi * g.next_unit();
    const double c = std::cos(angle), s = std::sin(angle);
    for (int r = 0; r < n; ++r) {
      const double a = m[static_cast<std::size_t>(r) * n + i];
      const double b = m[static_cast<std::size_t>(r) * n + j];
      m[static_cast<std::size_t>(r) * n + i] = c * a - s * b;
      m[static_cast<std::size_t>(r) * n + j] = s * a + c * b;
    }
  }
  return m;
}

}  // namespace

Dataset load_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidInput("cannot open csv file: " + path);
  Dataset out;
  std::string line;
  int line_no = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (first) {
      first = false;
      char* end = nullptr;
      std::strtod(fields.front().c_str(), &end);
      if (end == fields.front().c_str()) continue;  // header row
    }
    if (fields.size() < 2)
      throw InvalidInput("csv line " + std::to_string(line_no) + ": need features and a label");
    std::vector<double> row;
    row.reserve(fields.size() - 1);
    for (std::size_t i = 0; i + 1 < fields.size(); ++i)
      row.push_back(parse_field(fields[i], line_no));
    if (!out.features.empty() && row.size() != out.features.front().size())
      throw InvalidInput("csv line " + std::to_string(line_no) + ": ragged row");
    out.features.push_back(std::move(row));
    out.labels.push_back(parse_field(fields.back(), line_no));
  }
  if (out.features.empty()) throw InvalidInput("csv file has no data rows: " + path);
  return out;
}

Dataset pool(const std::vector<Dataset>& parts) {
  Dataset out;
  for (const Dataset& d : parts) {
    if (!out.features.empty() && d.dim() != out.dim())
      throw InvalidInput("pool: dimension mismatch between datasets");
    out.features.insert(out.features.end(), d.features.begin(), d.features.end());
    out.labels.insert(out.labels.end(), d.labels.begin(), d.labels.end());
  }
  if (out.features.empty()) throw InvalidInput("pool: no data");
  return out;
}

ObjectiveKind objective_from_string(const std::string& name) {
  if (name == "least-squares" || name == "least_squares") return ObjectiveKind::kLeastSquares;
  if (name == "logistic") return ObjectiveKind::kLogistic;
  throw InvalidInput("unknown objective: " + name);
}

std::string to_string(ObjectiveKind kind) {
  return kind == ObjectiveKind::kLeastSquares ? "least-squares" : "logistic";
}

Objective::Objective(ObjectiveKind kind, Dataset data, double l2)
    : kind_(kind), data_(std::move(data)), l2_(l2) {
  if (data_.features.empty()) throw InvalidInput("objective: empty dataset");
  if (data_.labels.size() != data_.features.size())
    throw InvalidInput("objective: label count mismatch");
  const std::size_t n = data_.features.front().size();
  if (n == 0) throw InvalidInput("objective: zero-dimensional features");
  for (const auto& row : data_.features) {
    if (row.size() != n) throw InvalidInput("objective: ragged feature rows");
    for (double v : row)
      if (!std::isfinite(v)) throw InvalidInput("objective: non-finite feature");
  }
  if (!(l2 >= 0.0) || !std::isfinite(l2)) throw InvalidInput("objective: bad l2 value");
  if (kind_ == ObjectiveKind::kLogistic) {
    for (double& y : data_.labels) {
      if (y == 0.0) y = -1.0;
      if (y != 1.0 && y != -1.0)
        throw InvalidInput("objective: logistic labels must be in {-1, 0, +1}");
    }
  } else {
    for (double y : data_.labels)
      if (!std::isfinite(y)) throw InvalidInput("objective: non-finite label");
  }
}

double Objective::value(std::span<const double> theta) const {
  if (static_cast<int>(theta.size()) != dim()) throw InvalidInput("objective: theta size mismatch");
  const int m = samples();
  double acc = 0.0;
  for (int s = 0; s < m; ++s) {
    const auto& x = data_.features[static_cast<std::size_t>(s)];
    double z = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) z += x[j] * theta[j];
    const double y = data_.labels[static_cast<std::size_t>(s)];
    if (kind_ == ObjectiveKind::kLeastSquares) {
      const double r = z - y;
      acc += 0.5 * r * r;
    } else {
      acc += logistic_loss(y * z);
    }
  }
  double reg = 0.0;
  for (double t : theta) reg += t * t;
  return acc / m + 0.5 * l2_ * reg;
}

std::vector<double> Objective::gradient(std::span<const double> theta) const {
  if (static_cast<int>(theta.size()) != dim()) throw InvalidInput("objective: theta size mismatch");
  const int m = samples();
  std::vector<double> g(theta.size(), 0.0);
  for (int s = 0; s < m; ++s) {
    const auto& x = data_.features[static_cast<std::size_t>(s)];
    double z = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) z += x[j] * theta[j];
    const double y = data_.labels[static_cast<std::size_t>(s)];
    const double w = (kind_ == ObjectiveKind::kLeastSquares) ? (z - y) : (-y * sigmoid(-y * z));
    for (std::size_t j = 0; j < x.size(); ++j) g[j] += w * x[j];
  }
  for (std::size_t j = 0; j < g.size(); ++j) g[j] = g[j] / m + l2_ * theta[j];
  return g;
}

SymmetricMatrix Objective::hessian(std::span<const double> theta) const {
  if (static_cast<int>(theta.size()) != dim()) throw InvalidInput("objective: theta size mismatch");
  const int n = dim();
  const int m = samples();
  std::vector<double> h(static_cast<std::size_t>(n) * n, 0.0);
  for (int s = 0; s < m; ++s) {
    const auto& x = data_.features[static_cast<std::size_t>(s)];
    double w = 1.0;
    if (kind_ == ObjectiveKind::kLogistic) {
      double z = 0.0;
      for (std::size_t j = 0; j < x.size(); ++j) z += x[j] * theta[j];
      const double p = sigmoid(data_.labels[static_cast<std::size_t>(s)] * z);
      w = p * (1.0 - p);
    }
    for (int r = 0; r < n; ++r) {
      const double xr = w * x[static_cast<std::size_t>(r)];
      for (int c = r; c < n; ++c)
        h[static_cast<std::size_t>(r) * n + c] += xr * x[static_cast<std::size_t>(c)];
    }
  }
  for (int r = 0; r < n; ++r) {
    h[static_cast<std::size_t>(r) * n + r] = h[static_cast<std::size_t>(r) * n + r] / m + l2_;
    for (int c = r + 1; c < n; ++c) {
      h[static_cast<std::size_t>(r) * n + c] /= m;
      h[static_cast<std::size_t>(c) * n + r] = h[static_cast<std::size_t>(r) * n + c];
    }
  }
  return SymmetricMatrix(n, h);
}

std::vector<Dataset> generate_synthetic(const SyntheticSpec& spec) {
  if (spec.devices < 1) throw InvalidInput("synthetic: need at least one device");
  if (spec.samples_per_device < 1) throw InvalidInput("synthetic: need at least one sample");
  if (spec.dim < 1) throw InvalidInput("synthetic: dimension must be positive");
  if (!(spec.condition >= 1.0)) throw InvalidInput("synthetic: condition must be >= 1");
  if (!(spec.noise >= 0.0) || !(spec.feature_shift >= 0.0) || !(spec.label_skew >= 0.0))
    throw InvalidInput("synthetic: negative magnitude");

  const int n = spec.dim;
  SplitMix64 shape_rng(mix_seed(spec.seed, 0x73686170ULL));
  const std::vector<double> rot = random_rotation(n, shape_rng);
  std::vector<double> scale(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) {
    const double t = (n == 1) ? 0.0 : static_cast<double>(j) / (n - 1);
    scale[static_cast<std::size_t>(j)] = std::sqrt(std::pow(1.0 / spec.condition, t));
  }
  std::vector<double> truth(static_cast<std::size_t>(n));
  for (double& t : truth) t = normal_draw(shape_rng) / std::sqrt(static_cast<double>(n));

  std::vector<Dataset> out(static_cast<std::size_t>(spec.devices));
  std::vector<double> raw(static_cast<std::size_t>(n));
  for (int dev = 0; dev < spec.devices; ++dev) {
    SplitMix64 g(mix_seed(spec.seed, 0x64617461ULL, static_cast<std::uint64_t>(dev)));
    std::vector<double> shift(static_cast<std::size_t>(n), 0.0);
    if (spec.feature_shift > 0.0) {
      double norm = 0.0;
      for (double& v : shift) {
        v = normal_draw(g);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (double& v : shift) v = spec.feature_shift * v / (norm > 0.0 ? norm : 1.0);
    }
    const double skew = (spec.label_skew > 0.0) ? spec.label_skew * (2.0 * g.next_unit() - 1.0) : 0.0;

    Dataset& d = out[static_cast<std::size_t>(dev)];
    d.features.resize(static_cast<std::size_t>(spec.samples_per_device));
    d.labels.resize(static_cast<std::size_t>(spec.samples_per_device));
    for (int s = 0; s < spec.samples_per_device; ++s) {
      for (int j = 0; j < n; ++j)
        raw[static_cast<std::size_t>(j)] = scale[static_cast<std::size_t>(j)] * normal_draw(g);
      std::vector<double> x(static_cast<std::size_t>(n));
      for (int r = 0; r < n; ++r) {
        double acc = shift[static_cast<std::size_t>(r)];
        for (int c = 0; c < n; ++c)
          acc += rot[static_cast<std::size_t>(r) * n + c] * raw[static_cast<std::size_t>(c)];
        x[static_cast<std::size_t>(r)] = acc;
      }
      double z = 0.0;
      for (int j = 0; j < n; ++j) z += x[static_cast<std::size_t>(j)] * truth[static_cast<std::size_t>(j)];
      double label = 0.0;
      if (spec.kind == ObjectiveKind::kLeastSquares) {
        label = z + spec.noise * normal_draw(g);
      } else {
        const double p = sigmoid(z + skew);
        label = (g.next_unit() < p) ? 1.0 : -1.0;
      }
      d.features[static_cast<std::size_t>(s)] = std::move(x);
      d.labels[static_cast<std::size_t>(s)] = label;
    }
  }
  return out;
}

}  // namespace qshed
