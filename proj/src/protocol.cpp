#include "qshed/protocol.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <string>

#include "qshed/errors.hpp"

namespace qshed {

namespace {

constexpr std::uint8_t kMagic[4] = {'Q', 'S', 'H', 'D'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kTypeUpdate = 0;
constexpr std::uint8_t kTypeBroadcast = 1;
constexpr std::uint8_t kFlagRenewal = 0x01;
constexpr std::uint8_t kFlagGradientOnly = 0x02;
constexpr std::uint32_t kMaxDim = 1u << 20;

class Writer {
public:
  void u8(std::uint8_t v) { buf_.push_back(v); }
  void u16(std::uint16_t v) {
    for (int i = 0; i < 2; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) buf_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void bytes(const std::vector<std::uint8_t>& b) { buf_.insert(buf_.end(), b.begin(), b.end()); }
  std::vector<std::uint8_t> take() { return std::move(buf_); }

private:
  std::vector<std::uint8_t> buf_;
};

class Reader {
public:
  explicit Reader(std::span<const std::uint8_t> data) : data_(data) {}
  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    const auto b = take(2);
    return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
  }
  std::uint32_t u32() {
    const auto b = take(4);
    return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
           (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    const auto b = take(8);
    for (int i = 7; i >= 0; --i) v = (v << 8) | b[static_cast<std::size_t>(i)];
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::span<const std::uint8_t> raw(std::size_t count) { return take(count); }
  std::size_t remaining() const { return data_.size() - pos_; }

private:
  std::span<const std::uint8_t> take(std::size_t count) {
    if (pos_ + count > data_.size()) throw ProtocolError("message truncated");
    const auto out = data_.subspan(pos_, count);
    pos_ += count;
    return out;
  }
  std::span<const std::uint8_t> data_;
  std::size_t pos_ = 0;
};

void check_finite(double v, const char* what) {
  if (!std::isfinite(v)) throw ProtocolError(std::string("non-finite ") + what);
}

void write_header(Writer& w, std::uint8_t type) {
  for (std::uint8_t m : kMagic) w.u8(m);
  w.u8(kVersion);
  w.u8(type);
}

void read_header(Reader& r, std::uint8_t expected_type) {
  for (std::uint8_t m : kMagic)
    if (r.u8() != m) throw ProtocolError("bad magic");
  const std::uint8_t version = r.u8();
  if (version != kVersion)
    throw ProtocolError("unsupported version " + std::to_string(version));
  const std::uint8_t type = r.u8();
  if (type != expected_type)
    throw ProtocolError("unexpected message type " + std::to_string(type));
}

}  // namespace

std::vector<std::uint8_t> encode_update(const DeviceUpdate& msg) {
  if (msg.n < 1 || msg.n > static_cast<int>(kMaxDim))
    throw InvalidInput("encode_update: bad dimension");
  if (msg.gradient.size() != static_cast<std::size_t>(msg.n))
    throw InvalidInput("encode_update: gradient size mismatch");
  if (msg.q_prev < 0 || msg.q_prev > msg.n || msg.q_t < 0 || msg.q_t > msg.n)
    throw InvalidInput("encode_update: q out of range");
  if (!msg.renewal && !msg.eigenvalues.empty())
    throw InvalidInput("encode_update: eigenvalues only travel on renewal rounds");
  if (msg.renewal && msg.eigenvalues.size() != static_cast<std::size_t>(msg.n))
    throw InvalidInput("encode_update: renewal must carry the full spectrum");
  if (msg.refinements.size() > 0xffff) throw InvalidInput("encode_update: too many refinements");

  Writer w;
  write_header(w, kTypeUpdate);
  w.u32(msg.device);
  w.u32(msg.round);
  std::uint8_t flags = 0;
  if (msg.renewal) flags |= kFlagRenewal;
  if (msg.gradient_only) flags |= kFlagGradientOnly;
  w.u8(flags);
  w.u32(static_cast<std::uint32_t>(msg.n));
  w.u16(static_cast<std::uint16_t>(msg.q_prev));
  w.u16(static_cast<std::uint16_t>(msg.q_t));
  check_finite(msg.rho, "rho");
  w.f64(msg.rho);
  if (msg.renewal) w.u64(msg.master_seed);
  for (double g : msg.gradient) {
    check_finite(g, "gradient entry");
    w.f64(g);
  }
  w.u16(static_cast<std::uint16_t>(msg.eigenvalues.size()));
  for (double v : msg.eigenvalues) {
    check_finite(v, "eigenvalue");
    w.f64(v);
  }
  w.u16(static_cast<std::uint16_t>(msg.refinements.size()));
  for (const RefinementMessage& ref : msg.refinements) {
    if (ref.eig_index < 0 || ref.eig_index >= msg.n)
      throw InvalidInput("encode_update: refinement index out of range");
    if (ref.added_bits < 1 || ref.prev_depth < 0 || ref.added_bits + ref.prev_depth > kMaxDepth)
      throw InvalidInput("encode_update: refinement depth out of range");
    if (ref.subcells.size() != static_cast<std::size_t>(msg.n))
      throw InvalidInput("encode_update: refinement size mismatch");
    w.u16(static_cast<std::uint16_t>(ref.eig_index));
    w.u8(static_cast<std::uint8_t>(ref.added_bits));
    w.u8(static_cast<std::uint8_t>(ref.prev_depth));
    BitWriter bw;
    const std::uint64_t limit = std::uint64_t{1} << ref.added_bits;
    for (std::uint64_t c : ref.subcells) {
      if (c >= limit) throw InvalidInput("encode_update: sub-cell out of range");
      bw.write(c, ref.added_bits);
    }
    w.bytes(bw.bytes());
  }
  return w.take();
}

DeviceUpdate decode_update(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  read_header(r, kTypeUpdate);
  DeviceUpdate msg;
  msg.device = r.u32();
  msg.round = r.u32();
  const std::uint8_t flags = r.u8();
  if (flags & ~(kFlagRenewal | kFlagGradientOnly)) throw ProtocolError("unknown flag bits");
  msg.renewal = flags & kFlagRenewal;
  msg.gradient_only = flags & kFlagGradientOnly;
  const std::uint32_t n = r.u32();
  if (n < 1 || n > kMaxDim) throw ProtocolError("dimension out of range");
  msg.n = static_cast<int>(n);
  msg.q_prev = r.u16();
  msg.q_t = r.u16();
  if (msg.q_prev > msg.n || msg.q_t > msg.n) throw ProtocolError("q out of range");
  msg.rho = r.f64();
  check_finite(msg.rho, "rho");
  if (msg.renewal) msg.master_seed = r.u64();
  msg.gradient.resize(n);
  for (double& g : msg.gradient) {
    g = r.f64();
    check_finite(g, "gradient entry");
  }
  const std::uint16_t eig_count = r.u16();
  if (msg.renewal ? (eig_count != n) : (eig_count != 0))
    throw ProtocolError("eigenvalue count inconsistent with flags");
  msg.eigenvalues.resize(eig_count);
  for (double& v : msg.eigenvalues) {
    v = r.f64();
    check_finite(v, "eigenvalue");
  }
  const std::uint16_t ref_count = r.u16();
  msg.refinements.resize(ref_count);
  for (RefinementMessage& ref : msg.refinements) {
    ref.eig_index = r.u16();
    if (ref.eig_index >= msg.n) throw ProtocolError("refinement index out of range");
    ref.added_bits = r.u8();
    ref.prev_depth = r.u8();
    if (ref.added_bits < 1 || ref.added_bits + ref.prev_depth > kMaxDepth)
      throw ProtocolError("refinement depth out of range");
    const std::size_t total_bits = static_cast<std::size_t>(msg.n) *
                                   static_cast<std::size_t>(ref.added_bits);
    const std::size_t nbytes = (total_bits + 7) / 8;
    BitReader br(r.raw(nbytes));
    ref.subcells.resize(n);
    for (std::uint64_t& c : ref.subcells) c = br.read(ref.added_bits);
  }
  if (msg.gradient_only && !msg.refinements.empty())
    throw ProtocolError("gradient-only update carries refinements");
  if (r.remaining() != 0) throw ProtocolError("trailing bytes");
  return msg;
}

std::vector<std::uint8_t> encode_broadcast(const Broadcast& msg) {
  if (msg.n < 1 || msg.n > static_cast<int>(kMaxDim))
    throw InvalidInput("encode_broadcast: bad dimension");
  if (msg.theta.size() != static_cast<std::size_t>(msg.n))
    throw InvalidInput("encode_broadcast: theta size mismatch");
  Writer w;
  write_header(w, kTypeBroadcast);
  w.u32(msg.round);
  w.u32(static_cast<std::uint32_t>(msg.n));
  check_finite(msg.eta, "step size");
  w.f64(msg.eta);
  w.u8(msg.terminate ? 1 : 0);
  for (double t : msg.theta) {
    check_finite(t, "theta entry");
    w.f64(t);
  }
  return w.take();
}

Broadcast decode_broadcast(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  read_header(r, kTypeBroadcast);
  Broadcast msg;
  msg.round = r.u32();
  const std::uint32_t n = r.u32();
  if (n < 1 || n > kMaxDim) throw ProtocolError("dimension out of range");
  msg.n = static_cast<int>(n);
  msg.eta = r.f64();
  check_finite(msg.eta, "step size");
  const std::uint8_t term = r.u8();
  if (term > 1) throw ProtocolError("bad terminate byte");
  msg.terminate = term == 1;
  msg.theta.resize(n);
  for (double& t : msg.theta) {
    t = r.f64();
    check_finite(t, "theta entry");
  }
  if (r.remaining() != 0) throw ProtocolError("trailing bytes");
  return msg;
}

std::size_t payload_bits(const DeviceUpdate& msg) {
  std::size_t bits = 0;
  for (const RefinementMessage& ref : msg.refinements)
    bits += static_cast<std::size_t>(msg.n) * static_cast<std::size_t>(ref.added_bits);
  return bits;
}

}  // namespace qshed
