#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace qshed {

// Bit allocation for quantized eigenvector transmission.
//
// For a rank-q approximation with offset rho, the expected squared Frobenius
// error of the reconstructed Hessian splits into a truncation tail plus
// dither terms driven by the squared cell widths x_i = Delta_i^2 = 4^(1-b_i):
//
//   E(x) = tail + sum_i gamma_i x_i + (a2 - a3) sum_i ell_i^2 x_i^2
//        + a3 (sum_i ell_i x_i)^2
//
// where ell_i = lambda_i - rho and gamma_i = d_q ell_i + a1 ell_i^2 for a
// first transmission. Refinement rounds keep the same form with gamma and
// ell scaled by 4^(-prev_bits), so one solver serves both. The bit budget
// sum_i b_i = B becomes the log-space constraint sum_i log2 x_i = 2(q - B)
// over the box 0 < x_i <= 4 (that is, b_i >= 0).

struct AllocationProblem {
  int n = 0;       // ambient Hessian dimension
  int q = 0;       // candidate eigenvectors in this solve
  int budget = 0;  // total new bits per coordinate across candidates
  double rho = 0.0;
  double a1 = 0.0, a2 = 0.0, a3 = 0.0;
  double d_q = 0.0;
  double tail = 0.0;          // sum_{i>q} (lambda_i - rho)^2
  std::vector<double> gamma;  // linear cost coefficients, size q
  std::vector<double> ell;    // effective shifted eigenvalues, size q
  std::vector<int> prev_bits; // cumulative depth before this round, size q
};

double a1_constant(int n);
double a2_constant(int n);
double a3_constant(int n);

// Fresh allocation over the q leading eigenvectors. `eigenvalues` is the full
// descending spectrum of the n-dimensional Hessian.
AllocationProblem make_problem(std::span<const double> eigenvalues, int q, int budget);

// Refinement allocation over the first q_bar candidates with per-candidate
// prior depths (zero for candidates not yet transmitted). `prev_bits` has one
// entry per eigenvector of the full spectrum.
AllocationProblem make_incremental_problem(std::span<const double> eigenvalues,
                                           std::span<const int> prev_bits, int q_bar, int budget);

// Cost kernel, O(q). `x` holds squared cell widths for the new bits.
double expected_error(const AllocationProblem& p, std::span<const double> x);
double expected_error_bits(const AllocationProblem& p, std::span<const int> bits);

// Same kernel; for problems built by make_incremental_problem the value is
// the total approximation error after appending the round's bits.
double incremental_cost(const AllocationProblem& p, std::span<const double> x);

inline double x_from_bits(int bits) { return std::exp2(2 - 2 * bits); }
inline double bits_from_x(double x) { return 1.0 - 0.5 * std::log2(x); }

// Exact minimizer of the full cost over the budget hyperplane intersected
// with the box, via projected Newton in y = ln x. NumericalFailure if the
// iteration cap is hit.
std::vector<double> solve_convex(const AllocationProblem& p);

// Closed-form minimizer of the first-order cost sum_i gamma_i x_i, with
// clamp-and-resolve over the coordinates that exceed the box.
std::vector<double> solve_first_order(const AllocationProblem& p);

// Integer depths summing exactly to the budget: round the real solution,
// then repair the deficit one bit at a time by smallest cost change.
std::vector<int> round_to_bits(const AllocationProblem& p, std::span<const double> x);

struct AllocationChoice {
  int q = 0;
  std::vector<int> bits;
  std::vector<double> x;
  double cost = 0.0;  // expected error at the real-valued solution
};

// Best q in [1, min(n, budget)] by real-valued cost; ties keep the smaller q.
AllocationChoice optimize_q(std::span<const double> eigenvalues, int budget);

// Candidate count for a refinement round.
int heuristic_q_bar(int q_prev, int round_budget, int n);

struct IncrementalPlan {
  int q_bar = 0;
  int q_t = 0;  // candidates with positive cumulative depth after the round
  std::vector<int> bits;
  std::vector<double> x;
  double predicted_error = 0.0;  // kernel value at the rounded bits
};

IncrementalPlan solve_incremental(std::span<const double> eigenvalues,
                                  std::span<const int> prev_bits, int q_prev, int round_budget);

}  // namespace qshed
