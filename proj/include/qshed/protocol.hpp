#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "qshed/quantize.hpp"

namespace qshed {

// Binary wire format for one optimization round; PROTOCOL.md is the
// normative byte-level description. All multi-byte integers and doubles are
// little-endian; packed cell bits are MSB-first within the stream.

struct DeviceUpdate {
  std::uint32_t device = 0;
  std::uint32_t round = 0;
  bool renewal = false;        // carries a fresh decomposition and seed
  bool gradient_only = false;  // no Hessian payload this round
  int n = 0;
  int q_prev = 0;
  int q_t = 0;
  double rho = 0.0;
  std::uint64_t master_seed = 0;    // meaningful only when renewal is set
  std::vector<double> gradient;     // size n
  std::vector<double> eigenvalues;  // full spectrum on renewal rounds, else empty
  std::vector<RefinementMessage> refinements;
};

struct Broadcast {
  std::uint32_t round = 0;
  int n = 0;
  double eta = 0.0;
  bool terminate = false;
  std::vector<double> theta;  // size n
};

std::vector<std::uint8_t> encode_update(const DeviceUpdate& msg);
DeviceUpdate decode_update(std::span<const std::uint8_t> bytes);

std::vector<std::uint8_t> encode_broadcast(const Broadcast& msg);
Broadcast decode_broadcast(std::span<const std::uint8_t> bytes);

// Eigenvector payload accounting: n * sum of added bits over refinements.
// Headers, gradients and eigenvalues are not counted.
std::size_t payload_bits(const DeviceUpdate& msg);

}  // namespace qshed
