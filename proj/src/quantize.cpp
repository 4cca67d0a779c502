#include "qshed/quantize.hpp"

#include <algorithm>
#include <cmath>

#include "qshed/errors.hpp"
#include "qshed/rng.hpp"

namespace qshed {

namespace {

constexpr std::uint64_t kDitherStreamTag = 0x5153484544515556ULL;

void check_depth(int bits) {
  if (bits < 1 || bits > kMaxDepth)
    throw InvalidInput("quantizer depth must be in [1, " + std::to_string(kMaxDepth) + "], got " +
                       std::to_string(bits));
}

// Cell index of one coordinate at the given depth. The same coordinate at a
// deeper depth yields an index whose high bits equal this one: the map is
// floor((v + u + 1) / Delta) with nested cell grids, and saturation clamps
// both depths on the same side of the range.
std::uint64_t cell_index(double v, double u, int bits) {
  const double scaled = (v + u + 1.0) * std::exp2(bits - 1);
  if (scaled <= 0.0) return 0;
  const double limit = std::exp2(bits);
  if (scaled >= limit) return (std::uint64_t{1} << bits) - 1;
  return static_cast<std::uint64_t>(scaled);
}

void check_vector(std::span<const double> v) {
  if (v.empty()) throw InvalidInput("quantize: empty vector");
  for (double x : v)
    if (!std::isfinite(x)) throw InvalidInput("quantize: non-finite component");
}

}  // namespace

std::uint64_t vector_dither_seed(std::uint64_t master_seed, int eig_index) {
  if (eig_index < 0) throw InvalidInput("vector_dither_seed: negative eigenvector index");
  return mix_seed(master_seed, kDitherStreamTag, static_cast<std::uint64_t>(eig_index));
}

std::vector<double> generate_dither(std::uint64_t dither_seed, int dim) {
  if (dim <= 0) throw InvalidInput("generate_dither: dimension must be positive");
  SplitMix64 g(dither_seed);
  std::vector<double> u(static_cast<std::size_t>(dim));
  for (double& x : u) x = g.next_centered();
  return u;
}

QuantizedVector quantize_with_dither(std::span<const double> v, int bits,
                                     std::span<const double> dither) {
  check_depth(bits);
  check_vector(v);
  if (dither.size() != v.size()) throw InvalidInput("quantize: dither length mismatch");
  QuantizedVector qv;
  qv.dim = static_cast<int>(v.size());
  qv.depth = bits;
  qv.stages = 1;
  qv.cells.resize(v.size());
  for (std::size_t j = 0; j < v.size(); ++j) qv.cells[j] = cell_index(v[j], dither[j], bits);
  return qv;
}

QuantizedVector quantize(std::span<const double> v, int bits, std::uint64_t dither_seed) {
  check_depth(bits);
  check_vector(v);
  QuantizedVector qv =
      quantize_with_dither(v, bits, generate_dither(dither_seed, static_cast<int>(v.size())));
  qv.dither_seed = dither_seed;
  return qv;
}

std::vector<double> dequantize(const QuantizedVector& qv) {
  if (qv.dim <= 0 || qv.cells.size() != static_cast<std::size_t>(qv.dim))
    throw InvalidInput("dequantize: malformed quantized vector");
  check_depth(qv.depth);
  const std::vector<double> u = generate_dither(qv.dither_seed, qv.dim);
  const double delta = interval_length(qv.depth);
  std::vector<double> out(static_cast<std::size_t>(qv.dim));
  for (std::size_t j = 0; j < out.size(); ++j) {
    const double mid = -1.0 + (static_cast<double>(qv.cells[j]) + 0.5) * delta - u[j];
    out[j] = std::clamp(mid, -1.0, 1.0);
  }
  return out;
}

std::pair<QuantizedVector, RefinementMessage> refine(const QuantizedVector& qv,
                                                     std::span<const double> v, int added_bits,
                                                     int eig_index) {
  if (added_bits < 1) throw InvalidInput("refine: added_bits must be positive");
  check_depth(qv.depth);
  check_depth(qv.depth + added_bits);
  check_vector(v);
  if (static_cast<int>(v.size()) != qv.dim) throw InvalidInput("refine: dimension mismatch");

  const std::vector<double> u = generate_dither(qv.dither_seed, qv.dim);
  QuantizedVector next = qv;
  next.depth = qv.depth + added_bits;
  next.stages = qv.stages + 1;
  for (std::size_t j = 0; j < v.size(); ++j) {
    if (cell_index(v[j], u[j], qv.depth) != qv.cells[j])
      throw ConsistencyError("refine: stored cell does not match the source vector");
    next.cells[j] = cell_index(v[j], u[j], next.depth);
  }
  return {next, make_refinement(next, eig_index, qv.depth)};
}

RefinementMessage make_refinement(const QuantizedVector& qv, int eig_index, int prev_depth) {
  check_depth(qv.depth);
  if (prev_depth < 0 || prev_depth >= qv.depth)
    throw InvalidInput("make_refinement: prev_depth must be in [0, depth)");
  RefinementMessage msg;
  msg.eig_index = eig_index;
  msg.added_bits = qv.depth - prev_depth;
  msg.prev_depth = prev_depth;
  msg.dither_seed = qv.dither_seed;
  const std::uint64_t mask = (msg.added_bits == 64) ? ~std::uint64_t{0}
                                                    : (std::uint64_t{1} << msg.added_bits) - 1;
  msg.subcells.resize(qv.cells.size());
  for (std::size_t j = 0; j < qv.cells.size(); ++j) msg.subcells[j] = qv.cells[j] & mask;
  return msg;
}

QuantizedVector apply_refinement(const QuantizedVector& receiver, const RefinementMessage& msg) {
  if (msg.added_bits < 1) throw ProtocolError("refinement with no added bits");
  if (msg.prev_depth == 0) {
    if (receiver.depth != 0 || !receiver.cells.empty())
      throw ProtocolError("initial transmission applied to non-empty receiver state");
    QuantizedVector qv;
    qv.dim = static_cast<int>(msg.subcells.size());
    qv.depth = msg.added_bits;
    qv.stages = 1;
    qv.dither_seed = msg.dither_seed;
    qv.cells = msg.subcells;
    check_depth(qv.depth);
    if (qv.dim <= 0) throw ProtocolError("refinement carries no coordinates");
    const std::uint64_t limit = std::uint64_t{1} << qv.depth;
    for (std::uint64_t c : qv.cells)
      if (c >= limit) throw ProtocolError("cell index out of range for depth");
    return qv;
  }
  if (receiver.depth != msg.prev_depth)
    throw ProtocolError("refinement depth mismatch: receiver at " + std::to_string(receiver.depth) +
                        ", message expects " + std::to_string(msg.prev_depth));
  if (receiver.dither_seed != msg.dither_seed)
    throw ProtocolError("refinement dither seed mismatch");
  if (msg.subcells.size() != receiver.cells.size())
    throw ProtocolError("refinement dimension mismatch");
  check_depth(receiver.depth + msg.added_bits);
  const std::uint64_t limit = std::uint64_t{1} << msg.added_bits;
  QuantizedVector next = receiver;
  next.depth = receiver.depth + msg.added_bits;
  next.stages = receiver.stages + 1;
  for (std::size_t j = 0; j < next.cells.size(); ++j) {
    if (msg.subcells[j] >= limit) throw ProtocolError("sub-cell index out of range");
    next.cells[j] = (receiver.cells[j] << msg.added_bits) | msg.subcells[j];
  }
  return next;
}

void BitWriter::write(std::uint64_t value, int bits) {
  if (bits < 0 || bits > 64) throw InvalidInput("BitWriter: width out of range");
  for (int k = bits - 1; k >= 0; --k) {
    if (nbits_ % 8 == 0) buf_.push_back(0);
    const std::uint8_t bit = static_cast<std::uint8_t>((value >> k) & 1u);
    buf_.back() = static_cast<std::uint8_t>(buf_.back() | (bit << (7 - nbits_ % 8)));
    ++nbits_;
  }
}

std::uint64_t BitReader::read(int bits) {
  if (bits < 0 || bits > 64) throw InvalidInput("BitReader: width out of range");
  std::uint64_t value = 0;
  for (int k = 0; k < bits; ++k) {
    const std::size_t byte = nbits_ / 8;
    if (byte >= data_.size()) throw ProtocolError("bit stream truncated");
    const std::uint8_t bit = (data_[byte] >> (7 - nbits_ % 8)) & 1u;
    value = (value << 1) | bit;
    ++nbits_;
  }
  return value;
}

}  // namespace qshed
