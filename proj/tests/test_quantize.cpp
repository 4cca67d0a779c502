#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <vector>

#include "qshed/errors.hpp"
#include "qshed/quantize.hpp"
#include "qshed/rng.hpp"

using namespace qshed;

namespace {

std::vector<double> random_vector(int dim, std::uint64_t seed, double scale) {
  SplitMix64 g(seed);
  std::vector<double> v(static_cast<std::size_t>(dim));
  for (double& x : v) x = scale * 2.0 * g.next_centered();
  return v;
}

}  // namespace

TEST_CASE("cell width halves per bit") {
  CHECK(interval_length(1) == 1.0);
  CHECK(interval_length(2) == 0.5);
  CHECK(interval_length(5) == 0.0625);
  const QuantizerParams p = make_params(3, 9, 4);
  CHECK(p.delta == 0.25);
  CHECK(p.bits == 3);
}

TEST_CASE("depth bounds are enforced") {
  const std::vector<double> v = {0.1, -0.2};
  CHECK_THROWS_AS(quantize(v, 0, 1), InvalidInput);
  CHECK_THROWS_AS(quantize(v, kMaxDepth + 1, 1), InvalidInput);
  CHECK_THROWS_AS(quantize(std::vector<double>{}, 2, 1), InvalidInput);
  QuantizedVector qv = quantize(v, kMaxDepth - 1, 1);
  CHECK_THROWS_AS(refine(qv, v, 2, 0), InvalidInput);
}

TEST_CASE("reconstruction error stays inside half a cell away from saturation") {
  const int depth = 4;
  const double delta = interval_length(depth);
  const std::vector<double> v = random_vector(32, 5, 0.45);
  const QuantizedVector qv = quantize(v, depth, 77);
  const std::vector<double> vhat = dequantize(qv);
  for (std::size_t j = 0; j < v.size(); ++j)
    CHECK(std::abs(vhat[j] - v[j]) <= 0.5 * delta + 1e-15);
}

TEST_CASE("saturating inputs clamp to the edge cells") {
  const std::vector<double> v = {3.0, -3.0};
  const QuantizedVector qv = quantize(v, 3, 123);
  CHECK(qv.cells[0] == 7);
  CHECK(qv.cells[1] == 0);
  const std::vector<double> vhat = dequantize(qv);
  CHECK(vhat[0] <= 1.0);
  CHECK(vhat[1] >= -1.0);
}

TEST_CASE("error moments match a uniform cell distribution") {
  const int depth = 3;
  const double delta = interval_length(depth);
  double sum = 0.0, sum2 = 0.0;
  int count = 0;
  for (int rep = 0; rep < 200; ++rep) {
    const std::vector<double> v = random_vector(24, 1000 + rep, 0.45);
    const QuantizedVector qv = quantize(v, depth, 5000 + rep);
    const std::vector<double> vhat = dequantize(qv);
    for (std::size_t j = 0; j < v.size(); ++j) {
      const double e = vhat[j] - v[j];
      sum += e;
      sum2 += e * e;
      ++count;
    }
  }
  const double mean = sum / count;
  const double var = sum2 / count - mean * mean;
  const double want = delta * delta / 12.0;
  CHECK(std::abs(mean) <= 3.0 * delta / std::sqrt(12.0 * count));
  CHECK(var == doctest::Approx(want).epsilon(0.10));
}

TEST_CASE("deeper cells refine shallower ones in place") {
  const std::vector<double> v = random_vector(16, 3, 0.45);
  const QuantizedVector shallow = quantize(v, 2, 31);
  const QuantizedVector deep = quantize(v, 6, 31);
  for (std::size_t j = 0; j < v.size(); ++j) CHECK((deep.cells[j] >> 4) == shallow.cells[j]);
}

TEST_CASE("staged refinement equals one shot quantization") {
  const std::vector<double> v = random_vector(8, 21, 0.45);
  const std::uint64_t seed = 404;

  QuantizedVector staged = quantize(v, 2, seed);
  auto [s3, r3] = refine(staged, v, 1, 0);
  auto [s5, r5] = refine(s3, v, 2, 0);
  const QuantizedVector direct = quantize(v, 5, seed);

  CHECK(s5.depth == 5);
  CHECK(s5.stages == 3);
  CHECK(s5.cells == direct.cells);
  CHECK(dequantize(s5) == dequantize(direct));
  CHECK(r3.added_bits == 1);
  CHECK(r3.prev_depth == 2);
  CHECK(r5.added_bits == 2);
  CHECK(r5.prev_depth == 3);
}

TEST_CASE("refine rejects a vector that disagrees with the stored cells") {
  std::vector<double> v = random_vector(8, 8, 0.45);
  const QuantizedVector qv = quantize(v, 2, 17);
  v[3] += 0.8;
  CHECK_THROWS_AS(refine(qv, v, 1, 0), ConsistencyError);
}

TEST_CASE("messages rebuild the receiver mirror bit for bit") {
  const std::vector<double> v = random_vector(10, 13, 0.45);
  const QuantizedVector first = quantize(v, 3, 555);

  const RefinementMessage m0 = make_refinement(first, 4, 0);
  CHECK(m0.eig_index == 4);
  CHECK(m0.added_bits == 3);
  const QuantizedVector r0 = apply_refinement(QuantizedVector{}, m0);
  CHECK(r0 == first);

  auto [second, m1] = refine(first, v, 2, 4);
  const QuantizedVector r1 = apply_refinement(r0, m1);
  CHECK(r1 == second);
  CHECK(r1.depth == 5);
}

TEST_CASE("refinement application rejects inconsistent state") {
  const std::vector<double> v = random_vector(6, 2, 0.45);
  const QuantizedVector qv = quantize(v, 2, 9);
  auto [next, msg] = refine(qv, v, 1, 0);

  const RefinementMessage fresh = make_refinement(qv, 0, 0);
  CHECK_THROWS_AS(apply_refinement(qv, fresh), ProtocolError);  // non-empty receiver

  QuantizedVector wrong_depth = qv;
  wrong_depth.depth = 1;
  CHECK_THROWS_AS(apply_refinement(wrong_depth, msg), ProtocolError);

  QuantizedVector wrong_seed = qv;
  wrong_seed.dither_seed ^= 1;
  CHECK_THROWS_AS(apply_refinement(wrong_seed, msg), ProtocolError);

  RefinementMessage bad_cell = msg;
  bad_cell.subcells[0] = 2;  // one added bit admits sub-cells 0 and 1 only
  CHECK_THROWS_AS(apply_refinement(qv, bad_cell), ProtocolError);

  RefinementMessage empty_add = msg;
  empty_add.added_bits = 0;
  CHECK_THROWS_AS(apply_refinement(qv, empty_add), ProtocolError);
}

TEST_CASE("dither streams are reproducible and seed separated") {
  const std::vector<double> a = generate_dither(77, 64);
  const std::vector<double> b = generate_dither(77, 64);
  const std::vector<double> c = generate_dither(78, 64);
  CHECK(a == b);
  CHECK(a != c);
  for (double u : a) {
    CHECK(u > -0.5);
    CHECK(u <= 0.5);
  }
  CHECK(vector_dither_seed(1, 0) != vector_dither_seed(1, 1));
  CHECK(vector_dither_seed(1, 0) != vector_dither_seed(2, 0));
  CHECK_THROWS_AS(vector_dither_seed(1, -1), InvalidInput);
}

TEST_CASE("bit packing is msb first with exact accounting") {
  BitWriter w;
  w.write(1, 1);
  w.write(0, 7);
  w.write(0b101, 3);
  CHECK(w.bits_written() == 11);
  REQUIRE(w.bytes().size() == 2);
  CHECK(w.bytes()[0] == 0x80);
  CHECK(w.bytes()[1] == 0xa0);

  BitReader r(w.bytes());
  CHECK(r.read(1) == 1);
  CHECK(r.read(7) == 0);
  CHECK(r.read(3) == 0b101);
  CHECK(r.bits_read() == 11);
  CHECK(r.read(5) == 0);  // padding inside the last byte
  CHECK_THROWS_AS(r.read(1), ProtocolError);
}
