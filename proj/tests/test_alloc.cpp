#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "qshed/alloc.hpp"
#include "qshed/errors.hpp"
#include "qshed/matrix.hpp"
#include "qshed/quantize.hpp"
#include "qshed/rng.hpp"

using namespace qshed;

namespace {

std::vector<double> random_spectrum(int n, std::uint64_t seed) {
  SplitMix64 g(seed);
  std::vector<double> v(static_cast<std::size_t>(n));
  double acc = 0.1 + g.next_unit();
  for (int i = n - 1; i >= 0; --i) {
    v[static_cast<std::size_t>(i)] = acc;
    acc += 0.05 + g.next_unit();
  }
  return v;
}

AllocationProblem two_coord_problem(double g0, double g1, int budget) {
  AllocationProblem p;
  p.n = 4;
  p.q = 2;
  p.budget = budget;
  p.a1 = a1_constant(p.n);
  p.a2 = a2_constant(p.n);
  p.a3 = a3_constant(p.n);
  p.gamma = {g0, g1};
  p.ell = {1.0, 1.0};
  p.prev_bits = {0, 0};
  return p;
}

// d cost / d ln x_i by central differences of the full kernel
std::vector<double> log_gradient(const AllocationProblem& p, const std::vector<double>& x) {
  const double h = 1e-5;
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    std::vector<double> hi = x, lo = x;
    hi[i] *= std::exp(h);
    lo[i] *= std::exp(-h);
    g[i] = (expected_error(p, hi) - expected_error(p, lo)) / (2.0 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("moment constants") {
  CHECK(a1_constant(2) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(a1_constant(8) == doctest::Approx(1.5).epsilon(1e-15));
  CHECK(a1_constant(64) == doctest::Approx(65.0 / 6.0).epsilon(1e-15));
  CHECK(a2_constant(4) == doctest::Approx(2.0 / 15.0).epsilon(1e-15));
  CHECK(a3_constant(4) == doctest::Approx(1.0 / 36.0).epsilon(1e-15));
  CHECK_THROWS_AS(a1_constant(0), InvalidInput);
  // the quadratic form needs a2 > a3 for positive definiteness
  for (int n = 1; n <= 1000; ++n) CHECK(a2_constant(n) > a3_constant(n));
}

TEST_CASE("bit and cell width conversions invert each other") {
  CHECK(x_from_bits(1) == 1.0);
  CHECK(x_from_bits(3) == 0.0625);
  CHECK(bits_from_x(1.0) == 1.0);
  CHECK(bits_from_x(4.0) == 0.0);
  for (int b = 0; b <= 10; ++b) CHECK(bits_from_x(x_from_bits(b)) == doctest::Approx(b).epsilon(1e-14));
}

TEST_CASE("problem construction on a worked spectrum") {
  const std::vector<double> lambda = {4.0, 2.0, 1.0, 0.5};
  const AllocationProblem p = make_problem(lambda, 2, 4);
  CHECK(p.rho == 1.0);
  CHECK(p.ell[0] == doctest::Approx(3.0));
  CHECK(p.ell[1] == doctest::Approx(1.0));
  CHECK(p.d_q == doctest::Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(p.tail == doctest::Approx(0.25).epsilon(1e-14));
  CHECK(p.gamma[0] == doctest::Approx(31.0 / 4.0).epsilon(1e-14));
  CHECK(p.gamma[1] == doctest::Approx(11.0 / 12.0).epsilon(1e-14));

  // full kernel at b = (1, 2), reduced by hand to one fraction
  const std::vector<int> bits = {1, 2};
  CHECK(expected_error_bits(p, bits) == doctest::Approx(455.0 / 48.0).epsilon(1e-13));
  const std::vector<double> x = {1.0, 0.25};
  CHECK(expected_error(p, x) == doctest::Approx(455.0 / 48.0).epsilon(1e-13));

  CHECK_THROWS_AS(make_problem(std::vector<double>{1.0, 2.0}, 1, 4), InvalidInput);
}

TEST_CASE("full spectrum problem has no tail and zero offset") {
  const std::vector<double> lambda = {4.0, 2.0, 1.0};
  const AllocationProblem p = make_problem(lambda, 3, 6);
  CHECK(p.rho == 0.0);
  CHECK(p.d_q == 0.0);
  CHECK(p.tail == 0.0);
}

TEST_CASE("first order water filling closed form") {
  const AllocationProblem p = two_coord_problem(9.0, 1.0, 4);
  const std::vector<double> x = solve_first_order(p);
  CHECK(x[0] == doctest::Approx(1.0 / 12.0).epsilon(1e-12));
  CHECK(x[1] == doctest::Approx(0.75).epsilon(1e-12));
  CHECK(bits_from_x(x[0]) + bits_from_x(x[1]) == doctest::Approx(4.0).epsilon(1e-12));
}

TEST_CASE("first order solver clamps cheap coordinates at zero bits") {
  const AllocationProblem p = two_coord_problem(1e6, 1.0, 2);
  const std::vector<double> x = solve_first_order(p);
  CHECK(x[1] == 4.0);
  CHECK(x[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("first order solver rejects a vanished cost weight") {
  const AllocationProblem p = two_coord_problem(1.0, 0.0, 3);
  CHECK_THROWS_AS(solve_first_order(p), DegenerateCoefficient);
}

TEST_CASE("fresh budget below the vector count is infeasible") {
  const std::vector<double> lambda = {4.0, 2.0, 1.0, 0.5};
  const AllocationProblem p = make_problem(lambda, 3, 2);
  CHECK_THROWS_AS(solve_convex(p), Infeasible);

  // with prior depth the same budget is a legitimate refinement
  const std::vector<int> prev = {3, 0, 0, 0};
  const AllocationProblem inc = make_incremental_problem(lambda, prev, 3, 2);
  CHECK_NOTHROW(solve_convex(inc));
}

TEST_CASE("exact solver meets the budget and equalizes the reduced gradient") {
  for (std::uint64_t seed : {10u, 11u, 12u, 13u}) {
    const std::vector<double> lambda = random_spectrum(7, seed);
    const int q = 4, budget = 9;
    const AllocationProblem p = make_problem(lambda, q, budget);
    const std::vector<double> x = solve_convex(p);

    double log_sum = 0.0;
    for (double xi : x) {
      CHECK(xi > 0.0);
      CHECK(xi <= 4.0 + 1e-12);
      log_sum += std::log2(xi);
    }
    CHECK(log_sum == doctest::Approx(2.0 * (q - budget)).epsilon(1e-8));

    const std::vector<double> g = log_gradient(p, x);
    double free_lo = 1e300, free_hi = -1e300, scale = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      scale = std::max(scale, std::abs(g[i]));
      if (x[i] < 4.0 * (1.0 - 1e-9)) {
        free_lo = std::min(free_lo, g[i]);
        free_hi = std::max(free_hi, g[i]);
      }
    }
    REQUIRE(free_hi >= free_lo);
    CHECK(free_hi - free_lo <= 1e-5 * std::max(1.0, scale));
    for (std::size_t i = 0; i < g.size(); ++i)
      if (x[i] >= 4.0 * (1.0 - 1e-9)) CHECK(g[i] <= free_lo + 1e-5 * std::max(1.0, scale));
  }
}

TEST_CASE("quadratic cost term is positive definite") {
  for (int n : {2, 5, 30}) {
    SplitMix64 g(static_cast<std::uint64_t>(n));
    std::vector<double> ell(static_cast<std::size_t>(n));
    for (double& e : ell) e = 0.05 + g.next_unit();
    const double a2 = a2_constant(n), a3 = a3_constant(n);
    SymmetricMatrix quad(n);
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) {
        double v = 2.0 * a3 * ell[static_cast<std::size_t>(i)] * ell[static_cast<std::size_t>(j)];
        if (i == j)
          v += 2.0 * (a2 - a3) * ell[static_cast<std::size_t>(i)] * ell[static_cast<std::size_t>(i)];
        quad.set(i, j, v);
      }
    CHECK(is_positive_definite(quad));
  }
}

TEST_CASE("rounded bits keep the budget and the cost ordering") {
  const std::vector<double> lambda = random_spectrum(6, 77);
  const AllocationProblem p = make_problem(lambda, 4, 7);
  const std::vector<double> x = solve_convex(p);
  const std::vector<int> bits = round_to_bits(p, x);
  CHECK(std::accumulate(bits.begin(), bits.end(), 0) == 7);
  for (int b : bits) CHECK(b >= 0);
  // cost weights fall with the spectrum, so bits do too
  for (std::size_t i = 1; i < bits.size(); ++i) CHECK(bits[i] <= bits[i - 1]);
}

TEST_CASE("rounding fails when prior depth exhausts the cell budget") {
  const std::vector<double> lambda = {3.0, 2.0, 1.0};
  const std::vector<int> prev = {kMaxDepth - 1, kMaxDepth - 1, 0};
  const AllocationProblem p = make_incremental_problem(lambda, prev, 2, 5);
  const std::vector<double> x = solve_convex(p);
  CHECK_THROWS_AS(round_to_bits(p, x), Infeasible);
}

TEST_CASE("incremental problem with no prior matches the fresh one") {
  const std::vector<double> lambda = random_spectrum(6, 5);
  const std::vector<int> zeros(6, 0);
  const AllocationProblem fresh = make_problem(lambda, 3, 3);
  const AllocationProblem inc = make_incremental_problem(lambda, zeros, 3, 3);
  CHECK(inc.rho == fresh.rho);
  CHECK(inc.tail == fresh.tail);
  for (int i = 0; i < 3; ++i) {
    CHECK(inc.gamma[static_cast<std::size_t>(i)] ==
          doctest::Approx(fresh.gamma[static_cast<std::size_t>(i)]).epsilon(1e-15));
    CHECK(inc.ell[static_cast<std::size_t>(i)] ==
          doctest::Approx(fresh.ell[static_cast<std::size_t>(i)]).epsilon(1e-15));
  }

  const std::vector<double> xf = solve_convex(fresh);
  const std::vector<double> xi = solve_convex(inc);
  for (int i = 0; i < 3; ++i)
    CHECK(xi[static_cast<std::size_t>(i)] ==
          doctest::Approx(xf[static_cast<std::size_t>(i)]).epsilon(1e-10));

  const IncrementalPlan plan = solve_incremental(lambda, zeros, 0, 3);
  CHECK(plan.q_bar == 3);
  CHECK(plan.bits == round_to_bits(fresh, xf));
}

TEST_CASE("deeply refined coordinates ask for fewer new bits") {
  const std::vector<double> lambda = random_spectrum(6, 31);
  std::vector<int> prev(6, 0);
  prev[0] = 6;
  const IncrementalPlan plan = solve_incremental(lambda, prev, 1, 6);
  REQUIRE(plan.q_bar >= 3);
  CHECK(plan.bits[0] <= plan.bits[1]);
  CHECK(plan.bits[0] <= plan.bits[2]);
  CHECK(std::accumulate(plan.bits.begin(), plan.bits.end(), 0) == 6);
  CHECK(plan.q_t >= 1);
}

TEST_CASE("candidate count heuristic grows with the budget and caps at n") {
  CHECK(heuristic_q_bar(0, 4, 16) == 4);
  CHECK(heuristic_q_bar(3, 4, 16) == 7);
  CHECK(heuristic_q_bar(14, 4, 16) == 16);
}

TEST_CASE("rank selection respects the one bit per vector rule") {
  const std::vector<double> lambda = random_spectrum(8, 19);
  for (int budget : {2, 5, 11}) {
    const AllocationChoice choice = optimize_q(lambda, budget);
    CHECK(choice.q >= 1);
    CHECK(choice.q <= std::min(8, budget));
    CHECK(std::accumulate(choice.bits.begin(), choice.bits.end(), 0) == budget);
    // the reported cost is the kernel value at the real-valued solution
    const AllocationProblem p = make_problem(lambda, choice.q, budget);
    CHECK(choice.cost == doctest::Approx(expected_error(p, choice.x)).epsilon(1e-12));
  }
}

TEST_CASE("rank selection never loses to a forced single vector") {
  const std::vector<double> lambda = random_spectrum(8, 23);
  const int budget = 6;
  const AllocationChoice choice = optimize_q(lambda, budget);
  const AllocationProblem p1 = make_problem(lambda, 1, budget);
  const double cost1 = expected_error(p1, solve_convex(p1));
  CHECK(choice.cost <= cost1 + 1e-12);
}
