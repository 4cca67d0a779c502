#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

namespace qshed {

// Mid-rise uniform quantizer over [-1, 1]: depth b gives 2^b cells of width
// Delta = 2^(1-b), reconstruction at cell midpoints, out-of-range values
// saturate to the extreme cells.
//
// Dithering is subtractive with one canonical dither per coordinate, uniform
// on (-1/2, 1/2], drawn from a seeded SplitMix64 stream and regenerated
// identically by the receiver. Because the dither width is an integer
// multiple of every cell width, the reconstruction error at every cumulative
// depth is exactly uniform on one cell (away from saturation), and deepening
// the quantizer never moves previously transmitted bits: the cell index at
// depth b+a is the depth-b index with a new low bits appended. See
// PROTOCOL.md for the normative stream layout.

inline double interval_length(int bits) { return std::exp2(1 - bits); }

struct QuantizerParams {
  int bits = 1;
  double delta = 1.0;  // 2 / 2^bits
  std::uint64_t seed = 0;
  int dim = 0;
};

inline QuantizerParams make_params(int bits, std::uint64_t seed, int dim) {
  return {bits, interval_length(bits), seed, dim};
}

// Quantized eigenvector state, identical on sender and receiver.
struct QuantizedVector {
  int dim = 0;
  int depth = 0;       // cumulative bits per coordinate
  int stages = 0;      // number of messages composing this state
  std::uint64_t dither_seed = 0;
  std::vector<std::uint64_t> cells;

  bool operator==(const QuantizedVector&) const = default;
};

// One round's worth of new bits for one eigenvector. `subcells` holds the
// appended low bits of each coordinate's cell index.
struct RefinementMessage {
  int eig_index = 0;
  int added_bits = 0;
  int prev_depth = 0;  // 0 on first transmission
  std::uint64_t dither_seed = 0;
  std::vector<std::uint64_t> subcells;

  bool operator==(const RefinementMessage&) const = default;
};

// Maximum cumulative depth; cell indices live in 64-bit integers.
inline constexpr int kMaxDepth = 62;

// Dither stream for one eigenvector: seed = vector_dither_seed(master, index).
std::uint64_t vector_dither_seed(std::uint64_t master_seed, int eig_index);
std::vector<double> generate_dither(std::uint64_t dither_seed, int dim);

QuantizedVector quantize(std::span<const double> v, int bits, std::uint64_t dither_seed);

// Deterministic variant with caller-supplied dither values (tests, oracles).
QuantizedVector quantize_with_dither(std::span<const double> v, int bits,
                                     std::span<const double> dither);

std::vector<double> dequantize(const QuantizedVector& qv);

// Extends qv by added_bits. `v` must be the vector qv was built from; the
// stored indices are recomputed and checked (ConsistencyError on mismatch).
std::pair<QuantizedVector, RefinementMessage> refine(const QuantizedVector& qv,
                                                     std::span<const double> v,
                                                     int added_bits, int eig_index);

// Message carrying the bits between prev_depth and qv.depth (prev_depth = 0
// reproduces the initial transmission).
RefinementMessage make_refinement(const QuantizedVector& qv, int eig_index, int prev_depth);

// Receiver side: applies msg to the mirrored state. For prev_depth 0 pass an
// empty QuantizedVector{}; the dither seed is taken from the message.
QuantizedVector apply_refinement(const QuantizedVector& receiver, const RefinementMessage& msg);

// Big-endian MSB-first bit packing of fixed-width values, used for the wire
// payload of cell indices.
class BitWriter {
public:
  void write(std::uint64_t value, int bits);
  const std::vector<std::uint8_t>& bytes() const { return buf_; }
  std::size_t bits_written() const { return nbits_; }

private:
  std::vector<std::uint8_t> buf_;
  std::size_t nbits_ = 0;
};

class BitReader {
public:
  explicit BitReader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint64_t read(int bits);  // ProtocolError past the end
  std::size_t bits_read() const { return nbits_; }

private:
  std::span<const std::uint8_t> data_;
  std::size_t nbits_ = 0;
};

}  // namespace qshed
