#pragma once

#include <vector>

#include "qshed/matrix.hpp"

namespace qshed {

// Full symmetric eigendecomposition H = V diag(values) V^T.
//
// values are sorted descending; vectors[i] is the unit eigenvector for
// values[i]. Sign convention: the largest-magnitude component of each vector
// is positive (ties resolved to the lowest index), which pins the
// decomposition down for bit-exact quantization tests. Eigenvalue ties keep
// the solver's column order.
struct EigenDecomposition {
  std::vector<double> values;
  std::vector<std::vector<double>> vectors;

  int dim() const { return static_cast<int>(values.size()); }
};

// Cyclic Jacobi rotations. Deterministic for identical input: fixed sweep
// order (p, q) row-major, fixed rotation formula. Converges when the
// off-diagonal Frobenius mass drops below 1e-12 * ||H||_F; capped at 100
// sweeps (NumericalFailure with the residual otherwise).
EigenDecomposition eigendecompose(const SymmetricMatrix& H);

// Low-rank-plus-identity approximation
//   sum_{i<q} (values[i] - rho) w_i w_i^T + rho I,
// with rho = values[q] for q < n and rho = 0 at q = n (the decomposition is
// then reproduced exactly when the w_i are the exact eigenvectors).
// `vectors` supplies the q retained vectors, quantized or exact.
SymmetricMatrix assemble_approx(const EigenDecomposition& eig, int q,
                                const std::vector<std::vector<double>>& vectors);

double approx_rho(const EigenDecomposition& eig, int q);

// Squared Frobenius norm of H - Happrox.
double frobenius_error_sq(const SymmetricMatrix& H, const SymmetricMatrix& Happrox);

}  // namespace qshed
