#include "qshed/alloc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "qshed/errors.hpp"
#include "qshed/quantize.hpp"

namespace qshed {

namespace {

constexpr double kGradTol = 1e-11;
constexpr double kReleaseTol = 1e-9;
constexpr double kStagnationTol = 1e-8;
constexpr int kMaxIterations = 500;

void check_spectrum(std::span<const double> eigenvalues) {
  if (eigenvalues.empty()) throw InvalidInput("allocation: empty spectrum");
  double scale = 0.0;
  for (double v : eigenvalues) {
    if (!std::isfinite(v)) throw InvalidInput("allocation: non-finite eigenvalue");
    scale = std::max(scale, std::abs(v));
  }
  const double slack = 1e-12 * std::max(1.0, scale);
  for (std::size_t i = 1; i < eigenvalues.size(); ++i)
    if (eigenvalues[i] > eigenvalues[i - 1] + slack)
      throw InvalidInput("allocation: eigenvalues must be sorted descending");
}

void check_problem(const AllocationProblem& p) {
  if (p.q < 1 || p.q > p.n) throw InvalidInput("allocation: q out of range");
  if (p.budget < 1) throw InvalidInput("allocation: budget must be positive");
  if (p.gamma.size() != static_cast<std::size_t>(p.q) ||
      p.ell.size() != static_cast<std::size_t>(p.q) ||
      p.prev_bits.size() != static_cast<std::size_t>(p.q))
    throw InvalidInput("allocation: malformed problem");
}

// Objective over all q coordinates; constants from pinned coordinates are
// included so line-search comparisons see the true cost.
double cost_of(const AllocationProblem& p, const std::vector<double>& x) {
  double lin = 0.0, quad = 0.0, cross = 0.0;
  for (int i = 0; i < p.q; ++i) {
    lin += p.gamma[i] * x[i];
    quad += p.ell[i] * p.ell[i] * x[i] * x[i];
    cross += p.ell[i] * x[i];
  }
  return p.tail + lin + (p.a2 - p.a3) * quad + p.a3 * cross * cross;
}

// All-zero cost coefficients: the error does not depend on the allocation,
// so pin the whole budget on the leading coordinate to keep the budget
// identity and stay deterministic.
std::vector<double> degenerate_allocation(const AllocationProblem& p) {
  std::vector<double> x(static_cast<std::size_t>(p.q), 4.0);
  x[0] = x_from_bits(p.budget);
  return x;
}

}  // namespace

// Coefficient of x in E||vhat vhat^T - v v^T||_F^2 for unit v: the diagonal
// contributes 4 sigma^2 and the off-diagonal 2(n-1) sigma^2 with
// sigma^2 = x/12, so the total is (2n+2)/12 x = (n+1)/6 x.
double a1_constant(int n) {
  if (n < 1) throw InvalidInput("a1_constant: dimension must be positive");
  return (n + 1) / 6.0;
}

double a2_constant(int n) {
  if (n < 1) throw InvalidInput("a2_constant: dimension must be positive");
  return n / 80.0 + static_cast<double>(n) * (n - 1) / 144.0;
}

double a3_constant(int n) {
  if (n < 1) throw InvalidInput("a3_constant: dimension must be positive");
  return n / 144.0;
}

AllocationProblem make_problem(std::span<const double> eigenvalues, int q, int budget) {
  check_spectrum(eigenvalues);
  const int n = static_cast<int>(eigenvalues.size());
  if (q < 1 || q > n) throw InvalidInput("make_problem: q out of range");
  if (budget < 1) throw InvalidInput("make_problem: budget must be positive");

  AllocationProblem p;
  p.n = n;
  p.q = q;
  p.budget = budget;
  p.rho = (q < n) ? eigenvalues[static_cast<std::size_t>(q)] : 0.0;
  p.a1 = a1_constant(n);
  p.a2 = a2_constant(n);
  p.a3 = a3_constant(n);
  for (int i = q; i < n; ++i) {
    const double gap = p.rho - eigenvalues[static_cast<std::size_t>(i)];
    p.d_q += gap / 6.0;
    p.tail += gap * gap;
  }
  p.gamma.resize(static_cast<std::size_t>(q));
  p.ell.resize(static_cast<std::size_t>(q));
  p.prev_bits.assign(static_cast<std::size_t>(q), 0);
  for (int i = 0; i < q; ++i) {
    const double lb = std::max(0.0, eigenvalues[static_cast<std::size_t>(i)] - p.rho);
    p.ell[static_cast<std::size_t>(i)] = lb;
    p.gamma[static_cast<std::size_t>(i)] = p.d_q * lb + p.a1 * lb * lb;
  }
  return p;
}

AllocationProblem make_incremental_problem(std::span<const double> eigenvalues,
                                           std::span<const int> prev_bits, int q_bar, int budget) {
  check_spectrum(eigenvalues);
  if (prev_bits.size() != eigenvalues.size())
    throw InvalidInput("make_incremental_problem: prev_bits length mismatch");
  for (int b : prev_bits)
    if (b < 0 || b > kMaxDepth)
      throw InvalidInput("make_incremental_problem: prior depth out of range");

  AllocationProblem p = make_problem(eigenvalues, q_bar, budget);
  for (int i = 0; i < q_bar; ++i) {
    const double s = std::exp2(-2 * prev_bits[static_cast<std::size_t>(i)]);
    p.gamma[static_cast<std::size_t>(i)] *= s;
    p.ell[static_cast<std::size_t>(i)] *= s;
    p.prev_bits[static_cast<std::size_t>(i)] = prev_bits[static_cast<std::size_t>(i)];
  }
  return p;
}

double expected_error(const AllocationProblem& p, std::span<const double> x) {
  check_problem(p);
  if (x.size() != static_cast<std::size_t>(p.q))
    throw InvalidInput("expected_error: allocation length mismatch");
  for (double v : x)
    if (!(v > 0.0) || !std::isfinite(v)) throw InvalidInput("expected_error: x must be positive");
  std::vector<double> xv(x.begin(), x.end());
  return cost_of(p, xv);
}

double expected_error_bits(const AllocationProblem& p, std::span<const int> bits) {
  check_problem(p);
  if (bits.size() != static_cast<std::size_t>(p.q))
    throw InvalidInput("expected_error_bits: allocation length mismatch");
  std::vector<double> x(bits.size());
  for (std::size_t i = 0; i < bits.size(); ++i) {
    if (bits[i] < 0) throw InvalidInput("expected_error_bits: negative depth");
    if (bits[i] + p.prev_bits[i] > kMaxDepth)
      throw InvalidInput("expected_error_bits: cumulative depth exceeds limit");
    x[i] = x_from_bits(bits[i]);
  }
  return cost_of(p, x);
}

double incremental_cost(const AllocationProblem& p, std::span<const double> x) {
  return expected_error(p, x);
}

std::vector<double> solve_convex(const AllocationProblem& p) {
  check_problem(p);
  const int q = p.q;
  // a fresh transmission gives every selected eigenvector at least one bit;
  // refinements may leave already-sent vectors untouched, so the rule only
  // binds when no coordinate carries prior depth
  const bool fresh =
      std::all_of(p.prev_bits.begin(), p.prev_bits.end(), [](int b) { return b == 0; });
  if (fresh && p.budget < p.q)
    throw Infeasible("solve_convex: budget below one bit per eigenvector");
  const double ln2 = std::numbers::ln2;
  const double y_max = 2.0 * ln2;

  std::vector<char> active(static_cast<std::size_t>(q), 0);  // pinned at x = 4
  std::vector<char> zero(static_cast<std::size_t>(q), 0);
  int m = 0;
  for (int i = 0; i < q; ++i) {
    zero[static_cast<std::size_t>(i)] = (p.gamma[static_cast<std::size_t>(i)] <= 0.0);
    if (!zero[static_cast<std::size_t>(i)]) ++m;
  }
  if (m == 0) return degenerate_allocation(p);

  std::vector<double> x(static_cast<std::size_t>(q), 4.0);
  if (m == 1) {
    for (int i = 0; i < q; ++i)
      if (!zero[static_cast<std::size_t>(i)]) x[static_cast<std::size_t>(i)] = x_from_bits(p.budget);
    return x;
  }

  const double c2 = p.a2 - p.a3;
  const double beta = 2.0 * p.a3;
  const double sum_target = 2.0 * (m - p.budget) * ln2;

  std::vector<double> y(static_cast<std::size_t>(q), 0.0);
  for (int i = 0; i < q; ++i)
    if (!zero[static_cast<std::size_t>(i)]) y[static_cast<std::size_t>(i)] = sum_target / m;

  std::vector<int> free_set;
  std::vector<double> grad(static_cast<std::size_t>(q), 0.0);
  double resid = std::numeric_limits<double>::infinity();

  for (int iter = 0; iter < kMaxIterations; ++iter) {
    free_set.clear();
    int pinned = 0;
    for (int i = 0; i < q; ++i) {
      if (zero[static_cast<std::size_t>(i)]) continue;
      if (active[static_cast<std::size_t>(i)])
        ++pinned;
      else
        free_set.push_back(i);
    }
    const int f = static_cast<int>(free_set.size());
    const double free_target = sum_target - y_max * pinned;

    double free_sum = 0.0;
    for (int i : free_set) free_sum += y[static_cast<std::size_t>(i)];
    const double shift = (free_target - free_sum) / f;
    for (int i : free_set) y[static_cast<std::size_t>(i)] += shift;

    double t = 0.0;
    for (int i = 0; i < q; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      x[k] = zero[k] ? 4.0 : (active[k] ? 4.0 : std::exp(y[k]));
      t += p.ell[k] * x[k];
    }
    for (int i = 0; i < q; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      grad[k] = p.gamma[k] * x[k] + 2.0 * c2 * p.ell[k] * p.ell[k] * x[k] * x[k] +
                2.0 * p.a3 * p.ell[k] * x[k] * t;
    }

    double mu = 0.0;
    for (int i : free_set) mu += grad[static_cast<std::size_t>(i)];
    mu /= f;
    resid = 0.0;
    for (int i : free_set) resid = std::max(resid, std::abs(grad[static_cast<std::size_t>(i)] - mu));

    const double scale = std::max(1.0, std::abs(mu));
    if (resid <= kGradTol * scale) {
      int release = -1;
      double worst = kReleaseTol * scale;
      for (int i = 0; i < q; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        if (!active[k] || zero[k]) continue;
        if (grad[k] - mu > worst) {
          worst = grad[k] - mu;
          release = i;
        }
      }
      if (release < 0) return x;
      active[static_cast<std::size_t>(release)] = 0;
      continue;
    }
    if (f < 2) continue;  // single free coordinate is fully determined

    // Newton direction on the free set: the Hessian in y is diagonal plus a
    // rank-one term, inverted with Sherman-Morrison inside a bordered solve
    // that keeps the budget hyperplane invariant.
    std::vector<double> dinv_g(static_cast<std::size_t>(f)), dinv_1(static_cast<std::size_t>(f)),
        dinv_w(static_cast<std::size_t>(f)), w(static_cast<std::size_t>(f));
    double wdw = 0.0;
    for (int j = 0; j < f; ++j) {
      const std::size_t k = static_cast<std::size_t>(free_set[static_cast<std::size_t>(j)]);
      const double diag = 2.0 * c2 * p.ell[k] * p.ell[k] * x[k] * x[k] + grad[k];
      w[static_cast<std::size_t>(j)] = p.ell[k] * x[k];
      dinv_g[static_cast<std::size_t>(j)] = grad[k] / diag;
      dinv_1[static_cast<std::size_t>(j)] = 1.0 / diag;
      dinv_w[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)] / diag;
      wdw += w[static_cast<std::size_t>(j)] * dinv_w[static_cast<std::size_t>(j)];
    }
    const double sm_denom = 1.0 + beta * wdw;
    auto apply_hinv = [&](const std::vector<double>& dinv_z, double w_dot_z) {
      std::vector<double> out(static_cast<std::size_t>(f));
      const double c = beta * w_dot_z / sm_denom;
      for (int j = 0; j < f; ++j)
        out[static_cast<std::size_t>(j)] =
            dinv_z[static_cast<std::size_t>(j)] - c * dinv_w[static_cast<std::size_t>(j)];
      return out;
    };
    double w_dot_g = 0.0, w_dot_1 = 0.0;
    for (int j = 0; j < f; ++j) {
      w_dot_g += w[static_cast<std::size_t>(j)] * dinv_g[static_cast<std::size_t>(j)];
      w_dot_1 += w[static_cast<std::size_t>(j)] * dinv_1[static_cast<std::size_t>(j)];
    }

    const std::vector<double> hg = apply_hinv(dinv_g, w_dot_g);
    const std::vector<double> h1 = apply_hinv(dinv_1, w_dot_1);
    double sum_hg = 0.0, sum_h1 = 0.0;
    for (int j = 0; j < f; ++j) {
      sum_hg += hg[static_cast<std::size_t>(j)];
      sum_h1 += h1[static_cast<std::size_t>(j)];
    }
    const double nu = -sum_hg / sum_h1;

    std::vector<double> step(static_cast<std::size_t>(f));
    double descent = 0.0;
    for (int j = 0; j < f; ++j) {
      step[static_cast<std::size_t>(j)] =
          -(hg[static_cast<std::size_t>(j)] + nu * h1[static_cast<std::size_t>(j)]);
      descent += grad[static_cast<std::size_t>(free_set[static_cast<std::size_t>(j)])] *
                 step[static_cast<std::size_t>(j)];
    }
    if (!(descent < 0.0)) {
      // fall back to the projected gradient direction
      for (int j = 0; j < f; ++j)
        step[static_cast<std::size_t>(j)] =
            -(grad[static_cast<std::size_t>(free_set[static_cast<std::size_t>(j)])] - mu);
      descent = 0.0;
      for (int j = 0; j < f; ++j)
        descent += grad[static_cast<std::size_t>(free_set[static_cast<std::size_t>(j)])] *
                   step[static_cast<std::size_t>(j)];
    }

    double alpha = 1.0;
    for (int j = 0; j < f; ++j) {
      const double pj = step[static_cast<std::size_t>(j)];
      if (pj > 0.0) {
        const double yj = y[static_cast<std::size_t>(free_set[static_cast<std::size_t>(j)])];
        alpha = std::min(alpha, (y_max - yj) / pj);
      }
    }
    alpha = std::max(alpha, 0.0);

    const double f0 = cost_of(p, x);
    std::vector<double> trial_x = x;
    std::vector<double> trial_y(static_cast<std::size_t>(f));
    int halvings = 0;
    for (;; ++halvings) {
      for (int j = 0; j < f; ++j) {
        const std::size_t k = static_cast<std::size_t>(free_set[static_cast<std::size_t>(j)]);
        trial_y[static_cast<std::size_t>(j)] =
            std::min(y[k] + alpha * step[static_cast<std::size_t>(j)], y_max);
        trial_x[k] = std::exp(trial_y[static_cast<std::size_t>(j)]);
      }
      if (cost_of(p, trial_x) <= f0 + 1e-4 * alpha * descent || halvings >= 40) break;
      alpha *= 0.5;
    }
    double moved = 0.0;
    bool newly_pinned = false;
    for (int j = 0; j < f; ++j) {
      const std::size_t k = static_cast<std::size_t>(free_set[static_cast<std::size_t>(j)]);
      moved = std::max(moved, std::abs(trial_y[static_cast<std::size_t>(j)] - y[k]));
      y[k] = trial_y[static_cast<std::size_t>(j)];
      if (y[k] >= y_max - 1e-12) {
        y[k] = y_max;
        active[k] = 1;
        newly_pinned = true;
      }
    }
    if ((halvings >= 40 || moved <= 5e-13) && !newly_pinned) {
      // the cost can no longer resolve the remaining descent in double
      // precision; accept the point if it is stationary to the contract
      // tolerance and no pinned coordinate wants off the bound
      int release = -1;
      double worst = kReleaseTol * scale;
      for (int i = 0; i < q; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        if (!active[k] || zero[k]) continue;
        if (grad[k] - mu > worst) {
          worst = grad[k] - mu;
          release = i;
        }
      }
      if (release >= 0) {
        active[static_cast<std::size_t>(release)] = 0;
        continue;
      }
      if (resid <= kStagnationTol * scale) return x;
      throw NumericalFailure("bit allocation solver stalled short of stationarity", resid);
    }
    bool any_free = false;
    for (int i = 0; i < q && !any_free; ++i)
      any_free = !zero[static_cast<std::size_t>(i)] && !active[static_cast<std::size_t>(i)];
    if (!any_free) {
      // keep the budget hyperplane reachable: unpin the steepest coordinate
      int release = free_set[0];
      for (int i : free_set)
        if (grad[static_cast<std::size_t>(i)] > grad[static_cast<std::size_t>(release)]) release = i;
      active[static_cast<std::size_t>(release)] = 0;
    }
  }
  // iteration cap: the point is still valid if it meets the contract
  // tolerance (an active-set flip-flop can burn iterations without ever
  // leaving the optimum's neighborhood)
  double t_final = 0.0;
  for (int i = 0; i < q; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    x[k] = zero[k] ? 4.0 : (active[k] ? 4.0 : std::exp(y[k]));
    t_final += p.ell[k] * x[k];
  }
  double mu_final = 0.0;
  int f_final = 0;
  for (int i = 0; i < q; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    grad[k] = p.gamma[k] * x[k] + 2.0 * (p.a2 - p.a3) * p.ell[k] * p.ell[k] * x[k] * x[k] +
              2.0 * p.a3 * p.ell[k] * x[k] * t_final;
    if (!zero[k] && !active[k]) {
      mu_final += grad[k];
      ++f_final;
    }
  }
  if (f_final > 0) {
    mu_final /= f_final;
    resid = 0.0;
    for (int i = 0; i < q; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      if (zero[k]) continue;
      if (active[k])
        resid = std::max(resid, grad[k] - mu_final);  // pinned: one-sided
      else
        resid = std::max(resid, std::abs(grad[k] - mu_final));
    }
    if (resid <= kStagnationTol * std::max(1.0, std::abs(mu_final))) return x;
  }
  throw NumericalFailure("bit allocation solver did not converge", resid);
}

std::vector<double> solve_first_order(const AllocationProblem& p) {
  check_problem(p);
  const int q = p.q;
  const double ln2 = std::numbers::ln2;
  const double y_max = 2.0 * ln2;

  std::vector<char> clamped(static_cast<std::size_t>(q), 0);
  std::vector<double> lnx(static_cast<std::size_t>(q), y_max);
  // the closed form divides by each cost weight, so a tied eigenvalue at the
  // cut (weight exactly zero) has no defined water level
  for (int i = 0; i < q; ++i)
    if (!(p.gamma[static_cast<std::size_t>(i)] > 0.0))
      throw DegenerateCoefficient("solve_first_order: zero cost weight at index " +
                                  std::to_string(i));
  for (;;) {
    int f = 0;
    double mean_ln_gamma = 0.0;
    for (int i = 0; i < q; ++i)
      if (!clamped[static_cast<std::size_t>(i)]) {
        mean_ln_gamma += std::log(p.gamma[static_cast<std::size_t>(i)]);
        ++f;
      }
    mean_ln_gamma /= f;
    const double offset = (2.0 * p.budget / f - 2.0) * ln2;
    bool violated = false;
    for (int i = 0; i < q; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      if (clamped[k]) continue;
      lnx[k] = mean_ln_gamma - std::log(p.gamma[k]) - offset;
      if (lnx[k] > y_max) {
        clamped[k] = 1;
        lnx[k] = y_max;
        violated = true;
      }
    }
    if (!violated) break;
  }
  std::vector<double> x(static_cast<std::size_t>(q));
  for (int i = 0; i < q; ++i) x[static_cast<std::size_t>(i)] = std::exp(lnx[static_cast<std::size_t>(i)]);
  return x;
}

std::vector<int> round_to_bits(const AllocationProblem& p, std::span<const double> x) {
  check_problem(p);
  if (x.size() != static_cast<std::size_t>(p.q))
    throw InvalidInput("round_to_bits: allocation length mismatch");
  std::vector<int> bits(x.size());
  int total = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!(x[i] > 0.0) || !std::isfinite(x[i]))
      throw InvalidInput("round_to_bits: x must be positive");
    const int cap = kMaxDepth - p.prev_bits[i];
    bits[i] = static_cast<int>(std::llround(bits_from_x(x[i])));
    bits[i] = std::clamp(bits[i], 0, cap);
    total += bits[i];
  }
  std::vector<int> trial = bits;
  while (total < p.budget) {
    int pick = -1;
    double best = std::numeric_limits<double>::infinity();
    const double base = expected_error_bits(p, bits);
    for (int i = 0; i < p.q; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      if (bits[k] >= kMaxDepth - p.prev_bits[k]) continue;
      trial[k] = bits[k] + 1;
      const double delta = expected_error_bits(p, trial) - base;
      trial[k] = bits[k];
      if (delta < best) {
        best = delta;
        pick = i;
      }
    }
    if (pick < 0) throw Infeasible("round_to_bits: budget exceeds total depth capacity");
    ++bits[static_cast<std::size_t>(pick)];
    trial[static_cast<std::size_t>(pick)] = bits[static_cast<std::size_t>(pick)];
    ++total;
  }
  while (total > p.budget) {
    int pick = -1;
    double best = std::numeric_limits<double>::infinity();
    const double base = expected_error_bits(p, bits);
    for (int i = 0; i < p.q; ++i) {
      const std::size_t k = static_cast<std::size_t>(i);
      if (bits[k] < 1) continue;
      trial[k] = bits[k] - 1;
      const double delta = expected_error_bits(p, trial) - base;
      trial[k] = bits[k];
      if (delta <= best) {
        best = delta;
        pick = i;
      }
    }
    --bits[static_cast<std::size_t>(pick)];
    trial[static_cast<std::size_t>(pick)] = bits[static_cast<std::size_t>(pick)];
    --total;
  }
  return bits;
}

AllocationChoice optimize_q(std::span<const double> eigenvalues, int budget) {
  check_spectrum(eigenvalues);
  const int n = static_cast<int>(eigenvalues.size());
  if (budget < 1) throw InvalidInput("optimize_q: budget must be positive");
  const int q_max = std::min(n, budget);

  AllocationChoice best;
  double best_cost = std::numeric_limits<double>::infinity();
  for (int q = 1; q <= q_max; ++q) {
    const AllocationProblem prob = make_problem(eigenvalues, q, budget);
    std::vector<double> x = solve_convex(prob);
    const double cost = expected_error(prob, x);
    if (cost < best_cost) {
      best_cost = cost;
      best.q = q;
      best.x = std::move(x);
      best.cost = cost;
    }
  }
  const AllocationProblem prob = make_problem(eigenvalues, best.q, budget);
  best.bits = round_to_bits(prob, best.x);
  return best;
}

int heuristic_q_bar(int q_prev, int round_budget, int n) {
  if (n < 1) throw InvalidInput("heuristic_q_bar: dimension must be positive");
  if (q_prev < 0 || q_prev > n) throw InvalidInput("heuristic_q_bar: q_prev out of range");
  if (round_budget < 1) throw InvalidInput("heuristic_q_bar: budget must be positive");
  return std::min(q_prev + round_budget, n);
}

IncrementalPlan solve_incremental(std::span<const double> eigenvalues,
                                  std::span<const int> prev_bits, int q_prev, int round_budget) {
  check_spectrum(eigenvalues);
  const int n = static_cast<int>(eigenvalues.size());
  if (prev_bits.size() != eigenvalues.size())
    throw InvalidInput("solve_incremental: prev_bits length mismatch");
  if (q_prev < 0 || q_prev > n) throw InvalidInput("solve_incremental: q_prev out of range");
  for (int i = 0; i < n; ++i) {
    if (prev_bits[static_cast<std::size_t>(i)] < 0)
      throw InvalidInput("solve_incremental: negative prior depth");
    if (i >= q_prev && prev_bits[static_cast<std::size_t>(i)] != 0)
      throw InvalidInput("solve_incremental: prior depth beyond q_prev");
  }

  IncrementalPlan plan;
  plan.q_bar = heuristic_q_bar(q_prev, round_budget, n);
  const AllocationProblem prob =
      make_incremental_problem(eigenvalues, prev_bits, plan.q_bar, round_budget);
  plan.x = solve_convex(prob);
  plan.bits = round_to_bits(prob, plan.x);
  plan.predicted_error = expected_error_bits(prob, plan.bits);
  plan.q_t = 0;
  for (int i = 0; i < plan.q_bar; ++i)
    if (prev_bits[static_cast<std::size_t>(i)] + plan.bits[static_cast<std::size_t>(i)] > 0)
      plan.q_t = i + 1;
  return plan;
}

}  // namespace qshed
