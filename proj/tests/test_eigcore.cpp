#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "qshed/eigen.hpp"
#include "qshed/errors.hpp"
#include "qshed/matrix.hpp"
#include "qshed/rng.hpp"

using namespace qshed;

namespace {

// Orthonormal rows built from random plane rotations.
std::vector<std::vector<double>> random_basis(int n, std::uint64_t seed) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(n),
                                        std::vector<double>(static_cast<std::size_t>(n), 0.0));
  for (int i = 0; i < n; ++i) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
  SplitMix64 g(seed);
  for (int sweep = 0; sweep < 3; ++sweep)
    for (int a = 0; a < n; ++a)
      for (int b = a + 1; b < n; ++b) {
        const double t = (g.next_unit() - 0.5) * 3.0;
        const double c = std::cos(t), s = std::sin(t);
        auto& ra = rows[static_cast<std::size_t>(a)];
        auto& rb = rows[static_cast<std::size_t>(b)];
        for (int j = 0; j < n; ++j) {
          const std::size_t k = static_cast<std::size_t>(j);
          const double va = ra[k], vb = rb[k];
          ra[k] = c * va - s * vb;
          rb[k] = s * va + c * vb;
        }
      }
  return rows;
}

SymmetricMatrix from_spectrum(const std::vector<double>& lambda,
                              const std::vector<std::vector<double>>& basis) {
  const int n = static_cast<int>(lambda.size());
  std::vector<double> a(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        a[static_cast<std::size_t>(i) * n + j] += lambda[static_cast<std::size_t>(k)] *
                                                  basis[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
                                                  basis[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
  return SymmetricMatrix(n, a);
}

}  // namespace

TEST_CASE("constructor symmetrizes a full buffer") {
  const std::vector<double> raw = {1.0, 3.0, 5.0, 2.0};
  SymmetricMatrix m(2, raw);
  CHECK(m(0, 0) == 1.0);
  CHECK(m(1, 1) == 2.0);
  CHECK(m(0, 1) == 4.0);
  CHECK(m(1, 0) == 4.0);
  m.set(0, 1, -7.0);
  CHECK(m(1, 0) == -7.0);
}

TEST_CASE("matvec and norms on a hand matrix") {
  SymmetricMatrix m(2, std::vector<double>{2.0, 1.0, 1.0, 3.0});
  const std::vector<double> x = {1.0, -1.0};
  const std::vector<double> y = m.matvec(x);
  CHECK(y[0] == doctest::Approx(1.0));
  CHECK(y[1] == doctest::Approx(-2.0));
  CHECK(m.max_abs() == 3.0);
  CHECK(m.frobenius() == doctest::Approx(std::sqrt(4.0 + 1.0 + 1.0 + 9.0)));
}

TEST_CASE("identity decomposes to a flat unit spectrum") {
  const EigenDecomposition eig = eigendecompose(SymmetricMatrix::identity(3));
  REQUIRE(eig.dim() == 3);
  for (double v : eig.values) CHECK(v == doctest::Approx(1.0));
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      const double d = dot(eig.vectors[static_cast<std::size_t>(i)],
                           eig.vectors[static_cast<std::size_t>(j)]);
      CHECK(d == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-12));
    }
}

TEST_CASE("diagonal input sorts eigenvalues descending with positive pivots") {
  SymmetricMatrix m(3);
  m.set(0, 0, 2.0);
  m.set(1, 1, 4.0);
  m.set(2, 2, 1.0);
  const EigenDecomposition eig = eigendecompose(m);
  CHECK(eig.values[0] == doctest::Approx(4.0));
  CHECK(eig.values[1] == doctest::Approx(2.0));
  CHECK(eig.values[2] == doctest::Approx(1.0));
  CHECK(eig.vectors[0][1] == doctest::Approx(1.0));
  CHECK(eig.vectors[1][0] == doctest::Approx(1.0));
  CHECK(eig.vectors[2][2] == doctest::Approx(1.0));
}

TEST_CASE("dense reconstruction from a rotated spectrum") {
  const int n = 8;
  std::vector<double> lambda(n);
  for (int i = 0; i < n; ++i) lambda[static_cast<std::size_t>(i)] = 5.0 * std::pow(0.6, i) + 0.1;
  const auto basis = random_basis(n, 42);
  const SymmetricMatrix h = from_spectrum(lambda, basis);
  const EigenDecomposition eig = eigendecompose(h);

  for (int i = 0; i < n; ++i)
    CHECK(eig.values[static_cast<std::size_t>(i)] ==
          doctest::Approx(lambda[static_cast<std::size_t>(i)]).epsilon(1e-9));

  // orthonormal columns and the documented sign convention
  for (int i = 0; i < n; ++i) {
    const auto& v = eig.vectors[static_cast<std::size_t>(i)];
    CHECK(norm2(v) == doctest::Approx(1.0).epsilon(1e-12));
    int arg = 0;
    for (int j = 1; j < n; ++j)
      if (std::abs(v[static_cast<std::size_t>(j)]) > std::abs(v[static_cast<std::size_t>(arg)]))
        arg = j;
    CHECK(v[static_cast<std::size_t>(arg)] > 0.0);
  }

  const SymmetricMatrix back = from_spectrum(eig.values, eig.vectors);
  double worst = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) worst = std::max(worst, std::abs(back(i, j) - h(i, j)));
  CHECK(worst <= 1e-8);
}

TEST_CASE("rank q plus ridge assembly matches the explicit formula") {
  const int n = 6, q = 3;
  std::vector<double> lambda = {4.0, 2.5, 1.5, 0.9, 0.4, 0.2};
  const auto basis = random_basis(n, 7);
  const SymmetricMatrix h = from_spectrum(lambda, basis);
  const EigenDecomposition eig = eigendecompose(h);

  CHECK(approx_rho(eig, q) == doctest::Approx(eig.values[q]).epsilon(1e-12));
  CHECK(approx_rho(eig, n) == 0.0);

  std::vector<std::vector<double>> lead(eig.vectors.begin(), eig.vectors.begin() + q);
  const SymmetricMatrix approx = assemble_approx(eig, q, lead);
  const double rho = eig.values[q];
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      double want = (i == j) ? rho : 0.0;
      for (int k = 0; k < q; ++k)
        want += (eig.values[static_cast<std::size_t>(k)] - rho) *
                eig.vectors[static_cast<std::size_t>(k)][static_cast<std::size_t>(i)] *
                eig.vectors[static_cast<std::size_t>(k)][static_cast<std::size_t>(j)];
      CHECK(approx(i, j) == doctest::Approx(want).epsilon(1e-12));
    }

  // full rank reproduces the input
  const SymmetricMatrix full = assemble_approx(eig, n, eig.vectors);
  CHECK(frobenius_error_sq(h, full) <= 1e-14);
}

TEST_CASE("frobenius error of a known perturbation") {
  SymmetricMatrix a = SymmetricMatrix::identity(3);
  SymmetricMatrix b = a;
  b.set(0, 1, 0.3);
  b.set(2, 2, 1.4);
  // off-diagonal entries count twice
  CHECK(frobenius_error_sq(a, b) == doctest::Approx(2 * 0.09 + 0.16).epsilon(1e-12));
}

TEST_CASE("cholesky solves an spd system and rejects an indefinite one") {
  const int n = 5;
  std::vector<double> lambda = {3.0, 2.0, 1.5, 1.0, 0.5};
  const auto basis = random_basis(n, 11);
  const SymmetricMatrix a = from_spectrum(lambda, basis);
  CHECK(is_positive_definite(a));

  SplitMix64 g(99);
  std::vector<double> b(n);
  for (double& v : b) v = g.next_centered();
  const std::vector<double> x = cholesky_solve(a, b);
  const std::vector<double> ax = a.matvec(x);
  for (int i = 0; i < n; ++i)
    CHECK(ax[static_cast<std::size_t>(i)] ==
          doctest::Approx(b[static_cast<std::size_t>(i)]).epsilon(1e-10));

  lambda.back() = -0.5;
  const SymmetricMatrix bad = from_spectrum(lambda, basis);
  CHECK_FALSE(is_positive_definite(bad));
  CHECK_THROWS_AS(cholesky_solve(bad, b), NumericalFailure);
}
