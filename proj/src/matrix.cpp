#include "qshed/matrix.hpp"

#include <cmath>
#include <cstdio>

#include "qshed/errors.hpp"

namespace qshed {

SymmetricMatrix::SymmetricMatrix(int n) : n_(n) {
  if (n < 1) throw InvalidInput("matrix dimension must be >= 1");
  a_.assign(static_cast<std::size_t>(n) * n, 0.0);
}

SymmetricMatrix::SymmetricMatrix(int n, std::span<const double> entries) : SymmetricMatrix(n) {
  if (entries.size() != static_cast<std::size_t>(n) * n)
    throw InvalidInput("matrix buffer size does not match dimension");
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double v = 0.5 * (entries[static_cast<std::size_t>(i) * n + j] +
                        entries[static_cast<std::size_t>(j) * n + i]);
      if (!std::isfinite(v)) throw InvalidInput("matrix entries must be finite");
      a_[static_cast<std::size_t>(i) * n + j] = v;
    }
}

SymmetricMatrix SymmetricMatrix::identity(int n, double scale) {
  SymmetricMatrix m(n);
  for (int i = 0; i < n; ++i) m.at(i, i) = scale;
  return m;
}

double SymmetricMatrix::max_abs() const {
  double m = 0.0;
  for (double v : a_) m = std::max(m, std::fabs(v));
  return m;
}

double SymmetricMatrix::frobenius() const {
  double s = 0.0;
  for (double v : a_) s += v * v;
  return std::sqrt(s);
}

std::vector<double> SymmetricMatrix::matvec(std::span<const double> x) const {
  if (x.size() != static_cast<std::size_t>(n_)) throw InvalidInput("matvec dimension mismatch");
  std::vector<double> y(n_, 0.0);
  for (int i = 0; i < n_; ++i) {
    double s = 0.0;
    const double* row = a_.data() + static_cast<std::size_t>(i) * n_;
    for (int j = 0; j < n_; ++j) s += row[j] * x[j];
    y[i] = s;
  }
  return y;
}

double dot(std::span<const double> x, std::span<const double> y) {
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += x[i] * y[i];
  return s;
}

double norm2(std::span<const double> x) { return std::sqrt(dot(x, x)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

namespace {

// Lower-triangular Cholesky factor, or empty on a non-positive pivot.
std::vector<double> cholesky_factor(const SymmetricMatrix& A) {
  const int n = A.dim();
  std::vector<double> L(static_cast<std::size_t>(n) * n, 0.0);
  for (int j = 0; j < n; ++j) {
    double d = A(j, j);
    for (int k = 0; k < j; ++k) d -= L[static_cast<std::size_t>(j) * n + k] * L[static_cast<std::size_t>(j) * n + k];
    if (!(d > 0.0)) return {};
    double lj = std::sqrt(d);
    L[static_cast<std::size_t>(j) * n + j] = lj;
    for (int i = j + 1; i < n; ++i) {
      double s = A(i, j);
      for (int k = 0; k < j; ++k)
        s -= L[static_cast<std::size_t>(i) * n + k] * L[static_cast<std::size_t>(j) * n + k];
      L[static_cast<std::size_t>(i) * n + j] = s / lj;
    }
  }
  return L;
}

}  // namespace

std::vector<double> cholesky_solve(const SymmetricMatrix& A, std::span<const double> b) {
  const int n = A.dim();
  if (b.size() != static_cast<std::size_t>(n)) throw InvalidInput("cholesky_solve dimension mismatch");
  std::vector<double> L = cholesky_factor(A);
  if (L.empty()) throw NumericalFailure("matrix is not positive definite", 0.0);
  std::vector<double> y(b.begin(), b.end());
  // L z = b
  for (int i = 0; i < n; ++i) {
    double s = y[i];
    for (int k = 0; k < i; ++k) s -= L[static_cast<std::size_t>(i) * n + k] * y[k];
    y[i] = s / L[static_cast<std::size_t>(i) * n + i];
  }
  // L^T x = z
  for (int i = n - 1; i >= 0; --i) {
    double s = y[i];
    for (int k = i + 1; k < n; ++k) s -= L[static_cast<std::size_t>(k) * n + i] * y[k];
    y[i] = s / L[static_cast<std::size_t>(i) * n + i];
  }
  return y;
}

bool is_positive_definite(const SymmetricMatrix& A) { return !cholesky_factor(A).empty(); }

}  // namespace qshed
