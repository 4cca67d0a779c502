#pragma once

#include <cstdint>
#include <span>
#include <vector>

// Independent verification routines. Nothing here calls into the production
// allocator or quantizer: constants and formulas are re-derived locally and
// the quantizer is simulated directly from its definition, so agreement
// between the two routes is evidence rather than tautology.

namespace qshed::oracle {

struct McResult {
  double mean = 0.0;
  double std_error = 0.0;
  int draws = 0;
};

// Monte Carlo estimate of E||H - Hhat||_F^2 for the rank-q reconstruction
// with per-eigenvector subtractive-dithered quantization at the given depths
// (all >= 1). `eigenvectors[i]` is the i-th unit eigenvector; all n are
// needed because the truncated tail contributes. Fresh dither every draw,
// quantization without saturation, explicit matrix assembly.
McResult mc_frobenius_error(std::span<const double> eigenvalues,
                            const std::vector<std::vector<double>>& eigenvectors, int q,
                            std::span<const int> bits, int draws, std::uint64_t seed);

// Closed-form expected error evaluated the slow way: local constants and an
// explicit pair sum for the cross term. `x` holds squared cell widths.
double reference_error_x(std::span<const double> eigenvalues, int q, std::span<const double> x);
double reference_error(std::span<const double> eigenvalues, int q, std::span<const int> bits);

struct GridResult {
  std::vector<double> x;
  double cost = 0.0;
};

// Grid minimization of the expected error over the budget hyperplane in
// log2(x) coordinates with iterative window shrinking. Supports q <= 3.
GridResult grid_search_alloc(std::span<const double> eigenvalues, int q, int budget,
                             int points_per_dim, int zoom_rounds);

struct IntegerResult {
  std::vector<int> bits;
  double cost = 0.0;
};

// Evaluates every nonnegative integer allocation summing to the budget.
IntegerResult exhaustive_integer_alloc(std::span<const double> eigenvalues, int q, int budget);

}  // namespace qshed::oracle
