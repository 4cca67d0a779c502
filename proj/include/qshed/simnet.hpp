#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qshed/matrix.hpp"
#include "qshed/objectives.hpp"
#include "qshed/protocol.hpp"

namespace qshed {

// Federated Newton simulation: devices hold local data, send gradients plus
// incrementally quantized Hessian eigenvectors under a per-round bit budget,
// and the aggregator mirrors their quantizer state from the byte stream
// alone. Decompositions are renewed on a fixed schedule and frozen in
// between; only the gradient is fresh every round.

enum class Mode { kQshed, kQshedFirstOrder, kShedExact, kNaiveUniform };
enum class Channel { kConstant, kRayleigh };

Mode mode_from_string(const std::string& name);
Channel channel_from_string(const std::string& name);
std::string to_string(Mode mode);
std::string to_string(Channel channel);

struct RunConfig {
  Mode mode = Mode::kQshed;
  Channel channel = Channel::kConstant;
  ObjectiveKind objective = ObjectiveKind::kLeastSquares;
  int devices = 4;
  int dim = 16;
  int samples_per_device = 256;
  int max_rounds = 200;
  int renewal_period = 20;  // rounds between fresh decompositions
  double budget_mean = 4.0;  // mean per-round bit budget per device
  double tolerance = 1e-6;   // gradient norm stopping threshold
  double l2 = 1e-3;
  double condition = 50.0;
  double noise = 0.1;
  double feature_shift = 0.0;
  double label_skew = 0.0;
  double jitter = 1e-10;
  std::uint64_t seed = 1;
  int threads = 1;
  std::vector<std::string> csv_paths;  // when set, overrides synthetic data
};

struct RoundMetrics {
  int round = 0;
  double loss = 0.0;
  double grad_norm = 0.0;
  double eta = 0.0;
  double q_mean = 0.0;
  std::uint64_t bits_round = 0;  // eigenvector payload bits (the budgeted quantity)
  std::uint64_t bits_cum = 0;
  std::uint64_t bytes_raw = 0;  // full encoded message size including headers and gradients
  double e_spec = 0.0;  // weighted reconstruction error, spectral norm per eigenvector
  double e_frob = 0.0;  // same with Frobenius norms
  double kappa = 0.0;   // convergence factor bound for this round's step
};

struct DeviceState {
  int id = 0;
  Objective objective;
  std::vector<double> eig_values;
  std::vector<std::vector<double>> eig_vectors;
  std::uint64_t master_seed = 0;
  std::vector<int> depths;              // cumulative bits per eigenvector
  std::vector<QuantizedVector> mirror;  // sender-side quantizer states
  int q_prev = 0;

  DeviceState(int id_, Objective obj) : id(id_), objective(std::move(obj)) {}
};

struct DeviceRoundOutput {
  std::vector<std::uint8_t> bytes;
  // exact-vector baseline ships eigenvectors out of band
  std::vector<std::vector<double>> exact_vectors;
  int exact_from = 0;
};

// Aggregator-side mirror of one device, built purely from decoded messages
// (plus the exact-vector side channel for the baseline mode).
struct MirrorState {
  bool have_renewal = false;
  std::uint64_t master_seed = 0;
  std::vector<double> eigenvalues;
  std::vector<QuantizedVector> states;
  std::vector<std::vector<double>> exact_vectors;
  int q_t = 0;
  double rho = 0.0;
  std::vector<double> gradient;
};

struct AggregatorState {
  std::vector<double> theta;
  std::vector<MirrorState> devices;
  int round = 0;
};

// Per-round bit budget. The fading channel draws an exponential gain, so
// budgets vary by round and device but are a pure function of the seed.
int channel_budget(Channel channel, double mean, std::uint64_t seed, int round, int device);

DeviceRoundOutput device_round(DeviceState& dev, const RunConfig& cfg,
                               std::span<const double> theta, int round, int budget,
                               bool renewal);

// Decodes, validates and folds one update into the mirror; returns the
// decoded message for accounting.
DeviceUpdate aggregate_update(AggregatorState& agg, std::span<const std::uint8_t> bytes,
                              const DeviceRoundOutput* side_channel);

// Hhat_d from the mirrored state: sum of (lambda_i - rho) vhat vhat^T over
// transmitted vectors plus rho I.
SymmetricMatrix assemble_device(const MirrorState& m, int n);

std::vector<double> newton_direction(const SymmetricMatrix& hessian, std::span<const double> grad,
                                     double jitter);

double armijo_eta(const Objective& pooled, std::span<const double> theta,
                  std::span<const double> grad, std::span<const double> direction);

// Exact spectral norm of v v^T - vhat vhat^T for unit v (rank <= 2).
double quantization_spectral_norm(std::span<const double> v, std::span<const double> vhat);

// Frobenius counterpart, ||v v^T - vhat vhat^T||_F.
double quantization_frobenius_norm(std::span<const double> v, std::span<const double> vhat);

// kappa_t = 1 - (lambda_min - e_t) / rho_bar: one-step contraction factor
// bound for the unit-step Newton iteration under Hessian approximation.
double convergence_bound(double lambda_min, double quant_error, double rho_bar);

struct RunResult {
  bool converged = false;
  int rounds = 0;
  std::vector<double> theta;
  std::vector<RoundMetrics> metrics;
};

RunResult run(const RunConfig& cfg);

// Deterministic CSV with one row per round; doubles printed with %.17g.
void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& metrics);

}  // namespace qshed
