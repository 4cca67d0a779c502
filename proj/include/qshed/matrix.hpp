#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace qshed {

// Dense symmetric matrix, row-major. Construction symmetrizes the input as
// (A + A^T)/2 so entries[i][j] == entries[j][i] holds exactly.
class SymmetricMatrix {
public:
  SymmetricMatrix() = default;
  explicit SymmetricMatrix(int n);
  // From a full row-major n*n buffer; symmetrized.
  SymmetricMatrix(int n, std::span<const double> entries);

  static SymmetricMatrix identity(int n, double scale = 1.0);

  int dim() const { return n_; }
  double operator()(int i, int j) const { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  double& at(int i, int j) { return a_[static_cast<std::size_t>(i) * n_ + j]; }
  void set(int i, int j, double v) {
    a_[static_cast<std::size_t>(i) * n_ + j] = v;
    a_[static_cast<std::size_t>(j) * n_ + i] = v;
  }

  std::span<const double> data() const { return a_; }

  // max_i,j |a_ij|
  double max_abs() const;
  // Frobenius norm.
  double frobenius() const;

  std::vector<double> matvec(std::span<const double> x) const;

private:
  int n_ = 0;
  std::vector<double> a_;
};

// y = A x for a rank-structured accumulation is done by callers; these are
// the few dense kernels the project needs.
double dot(std::span<const double> x, std::span<const double> y);
double norm2(std::span<const double> x);
void axpy(double alpha, std::span<const double> x, std::span<double> y);

// In-place Cholesky solve of A x = b for symmetric positive definite A.
// Throws NumericalFailure if a non-positive pivot is met.
std::vector<double> cholesky_solve(const SymmetricMatrix& A, std::span<const double> b);

// Smallest eigenvalue estimate via eigendecomposition is in eigen.hpp; this
// cheap check just attempts a Cholesky factorization.
bool is_positive_definite(const SymmetricMatrix& A);

}  // namespace qshed
