#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "qshed/errors.hpp"
#include "qshed/objectives.hpp"
#include "qshed/rng.hpp"

using namespace qshed;

namespace {

Dataset small_dataset(ObjectiveKind kind, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.devices = 1;
  spec.samples_per_device = 40;
  spec.dim = 5;
  spec.kind = kind;
  spec.seed = seed;
  return generate_synthetic(spec).front();
}

std::vector<double> random_theta(int dim, std::uint64_t seed) {
  SplitMix64 g(seed);
  std::vector<double> t(static_cast<std::size_t>(dim));
  for (double& v : t) v = g.next_centered();
  return t;
}

}  // namespace

TEST_CASE("kind names round trip") {
  CHECK(objective_from_string("least-squares") == ObjectiveKind::kLeastSquares);
  CHECK(objective_from_string("logistic") == ObjectiveKind::kLogistic);
  CHECK(to_string(ObjectiveKind::kLogistic) == "logistic");
  CHECK_THROWS_AS(objective_from_string("ridge"), InvalidInput);
}

TEST_CASE("least squares value matches the closed form") {
  Dataset d;
  d.features = {{1.0, 0.0}, {0.0, 1.0}};
  d.labels = {1.0, 2.0};
  const Objective obj(ObjectiveKind::kLeastSquares, d, 0.0);
  const std::vector<double> zero = {0.0, 0.0};
  CHECK(obj.value(zero) == doctest::Approx(0.5 * (1.0 + 4.0) / 2.0).epsilon(1e-15));
  const std::vector<double> exact = {1.0, 2.0};
  CHECK(obj.value(exact) == doctest::Approx(0.0));
  const std::vector<double> g = obj.gradient(exact);
  CHECK(std::abs(g[0]) <= 1e-15);
  CHECK(std::abs(g[1]) <= 1e-15);
}

TEST_CASE("gradients match finite differences") {
  for (ObjectiveKind kind : {ObjectiveKind::kLeastSquares, ObjectiveKind::kLogistic}) {
    const Objective obj(kind, small_dataset(kind, 3), 1e-2);
    std::vector<double> theta = random_theta(obj.dim(), 17);
    const std::vector<double> g = obj.gradient(theta);
    const double h = 1e-6;
    for (int j = 0; j < obj.dim(); ++j) {
      const std::size_t k = static_cast<std::size_t>(j);
      std::vector<double> hi = theta, lo = theta;
      hi[k] += h;
      lo[k] -= h;
      const double fd = (obj.value(hi) - obj.value(lo)) / (2.0 * h);
      CHECK(g[k] == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("hessians match finite differences of the gradient") {
  for (ObjectiveKind kind : {ObjectiveKind::kLeastSquares, ObjectiveKind::kLogistic}) {
    const Objective obj(kind, small_dataset(kind, 5), 1e-2);
    std::vector<double> theta = random_theta(obj.dim(), 29);
    const auto hess = obj.hessian(theta);
    const double h = 1e-5;
    double worst = 0.0, scale = hess.max_abs();
    for (int j = 0; j < obj.dim(); ++j) {
      std::vector<double> hi = theta, lo = theta;
      hi[static_cast<std::size_t>(j)] += h;
      lo[static_cast<std::size_t>(j)] -= h;
      const std::vector<double> gh = obj.gradient(hi);
      const std::vector<double> gl = obj.gradient(lo);
      for (int i = 0; i < obj.dim(); ++i) {
        const double fd =
            (gh[static_cast<std::size_t>(i)] - gl[static_cast<std::size_t>(i)]) / (2.0 * h);
        worst = std::max(worst, std::abs(hess(i, j) - fd));
      }
    }
    CHECK(worst <= 1e-5 * std::max(1.0, scale));
  }
}

TEST_CASE("pooled objective is the sample weighted mean of the parts") {
  SyntheticSpec spec;
  spec.devices = 3;
  spec.samples_per_device = 30;
  spec.dim = 4;
  spec.seed = 9;
  const std::vector<Dataset> parts = generate_synthetic(spec);
  const double l2 = 1e-2;
  const Objective pooled(ObjectiveKind::kLeastSquares, pool(parts), l2);
  const std::vector<double> theta = random_theta(4, 33);

  double mix = 0.0;
  int total = 0;
  for (const Dataset& d : parts) total += d.size();
  for (const Dataset& d : parts) {
    const Objective local(ObjectiveKind::kLeastSquares, d, l2);
    mix += local.value(theta) * d.size() / total;
  }
  CHECK(pooled.value(theta) == doctest::Approx(mix).epsilon(1e-12));
}

TEST_CASE("logistic treats zero labels as the negative class") {
  Dataset zeros, signs;
  zeros.features = {{0.4, -0.2}, {-0.7, 0.3}, {0.1, 0.9}};
  zeros.labels = {0.0, 1.0, 0.0};
  signs.features = zeros.features;
  signs.labels = {-1.0, 1.0, -1.0};
  const Objective a(ObjectiveKind::kLogistic, zeros, 1e-3);
  const Objective b(ObjectiveKind::kLogistic, signs, 1e-3);
  const std::vector<double> theta = {0.3, -0.8};
  CHECK(a.value(theta) == b.value(theta));
  CHECK(a.gradient(theta) == b.gradient(theta));
}

TEST_CASE("logistic stays finite at extreme margins") {
  Dataset d;
  d.features = {{1.0, 0.0}, {-1.0, 0.0}};
  d.labels = {1.0, -1.0};
  const Objective obj(ObjectiveKind::kLogistic, d, 0.0);
  for (double s : {1e3, -1e3, 1e8, -1e8}) {
    const std::vector<double> theta = {s, 0.0};
    const double v = obj.value(theta);
    CHECK(std::isfinite(v));
    CHECK(v >= 0.0);
    for (double g : obj.gradient(theta)) CHECK(std::isfinite(g));
    CHECK(obj.hessian(theta).max_abs() < 1.0);
  }
  // a huge wrong-sign margin costs about the margin itself
  const std::vector<double> wrong = {-50.0, 0.0};
  CHECK(obj.value(wrong) == doctest::Approx(50.0).epsilon(1e-6));
}

TEST_CASE("csv loader reads rows and skips one header line") {
  const std::string path = "objtest_tmp.csv";
  {
    std::ofstream out(path);
    out << "x1,x2,label\n";
    out << "0.5,-1.25,1\n";
    out << "1.5e-1,2.0,0\n";
  }
  const Dataset d = load_csv(path);
  std::remove(path.c_str());
  REQUIRE(d.size() == 2);
  REQUIRE(d.dim() == 2);
  CHECK(d.features[0][0] == 0.5);
  CHECK(d.features[0][1] == -1.25);
  CHECK(d.labels[0] == 1.0);
  CHECK(d.features[1][0] == doctest::Approx(0.15));
  CHECK(d.labels[1] == 0.0);
}

TEST_CASE("csv loader rejects ragged and missing input") {
  const std::string path = "objtest_bad.csv";
  {
    std::ofstream out(path);
    out << "1.0,2.0,1\n";
    out << "1.0,1\n";
  }
  CHECK_THROWS_AS(load_csv(path), InvalidInput);
  std::remove(path.c_str());
  CHECK_THROWS_AS(load_csv("no_such_file.csv"), InvalidInput);
}

TEST_CASE("synthetic generation is deterministic and device dependent") {
  SyntheticSpec spec;
  spec.devices = 2;
  spec.samples_per_device = 16;
  spec.dim = 6;
  spec.feature_shift = 0.5;
  spec.seed = 21;
  const std::vector<Dataset> a = generate_synthetic(spec);
  const std::vector<Dataset> b = generate_synthetic(spec);
  REQUIRE(a.size() == 2);
  CHECK(a[0].features == b[0].features);
  CHECK(a[1].labels == b[1].labels);
  CHECK(a[0].features != a[1].features);

  spec.seed = 22;
  const std::vector<Dataset> c = generate_synthetic(spec);
  CHECK(a[0].features != c[0].features);
}
