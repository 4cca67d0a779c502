#include "qshed/simnet.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <mutex>
#include <numeric>
#include <thread>

#include "qshed/alloc.hpp"
#include "qshed/eigen.hpp"
#include "qshed/errors.hpp"
#include "qshed/rng.hpp"

namespace qshed {

namespace {

constexpr std::uint64_t kSeedTag = 0x71736864ULL;

void check_config(const RunConfig& cfg) {
  if (cfg.devices < 1) throw InvalidInput("run: need at least one device");
  if (cfg.max_rounds < 1) throw InvalidInput("run: max_rounds must be positive");
  if (cfg.renewal_period < 1) throw InvalidInput("run: renewal_period must be positive");
  if (!(cfg.budget_mean >= 1.0)) throw InvalidInput("run: budget_mean must be at least 1");
  if (!(cfg.tolerance > 0.0)) throw InvalidInput("run: tolerance must be positive");
  if (!(cfg.jitter >= 0.0)) throw InvalidInput("run: jitter must be nonnegative");
  if (cfg.threads < 1) throw InvalidInput("run: threads must be positive");
  if (!cfg.csv_paths.empty() && static_cast<int>(cfg.csv_paths.size()) != cfg.devices)
    throw InvalidInput("run: need one csv path per device");
}

}  // namespace

Mode mode_from_string(const std::string& name) {
  if (name == "qshed") return Mode::kQshed;
  if (name == "qshed-first-order") return Mode::kQshedFirstOrder;
  if (name == "shed-exact") return Mode::kShedExact;
  if (name == "naive-uniform") return Mode::kNaiveUniform;
  throw InvalidInput("unknown mode: " + name);
}

Channel channel_from_string(const std::string& name) {
  if (name == "constant") return Channel::kConstant;
  if (name == "rayleigh") return Channel::kRayleigh;
  throw InvalidInput("unknown channel: " + name);
}

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::kQshed: return "qshed";
    case Mode::kQshedFirstOrder: return "qshed-first-order";
    case Mode::kShedExact: return "shed-exact";
    case Mode::kNaiveUniform: return "naive-uniform";
  }
  return "?";
}

std::string to_string(Channel channel) {
  return channel == Channel::kConstant ? "constant" : "rayleigh";
}

int channel_budget(Channel channel, double mean, std::uint64_t seed, int round, int device) {
  if (!(mean >= 1.0)) throw InvalidInput("channel_budget: mean must be at least 1");
  if (channel == Channel::kConstant) return std::max(1, static_cast<int>(std::llround(mean)));
  SplitMix64 g(mix_seed(seed, (kSeedTag << 24) | static_cast<std::uint64_t>(round),
                        static_cast<std::uint64_t>(device)));
  const double gain = g.next_exponential();
  const long bits = std::lround(mean * gain);
  return static_cast<int>(std::clamp<long>(bits, 1, 4096));
}

DeviceRoundOutput device_round(DeviceState& dev, const RunConfig& cfg,
                               std::span<const double> theta, int round, int budget,
                               bool renewal) {
  const int n = dev.objective.dim();
  if (static_cast<int>(theta.size()) != n) throw InvalidInput("device_round: theta size mismatch");
  if (budget < 1) throw InvalidInput("device_round: budget must be positive");

  DeviceUpdate msg;
  msg.device = static_cast<std::uint32_t>(dev.id);
  msg.round = static_cast<std::uint32_t>(round);
  msg.n = n;
  msg.gradient = dev.objective.gradient(theta);

  if (renewal) {
    const EigenDecomposition eig = eigendecompose(dev.objective.hessian(theta));
    dev.eig_values = eig.values;
    dev.eig_vectors = eig.vectors;
    dev.master_seed = mix_seed(cfg.seed, (kSeedTag << 32) | static_cast<std::uint64_t>(round),
                               static_cast<std::uint64_t>(dev.id));
    dev.depths.assign(static_cast<std::size_t>(n), 0);
    dev.mirror.assign(static_cast<std::size_t>(n), QuantizedVector{});
    dev.q_prev = 0;
    msg.renewal = true;
    msg.master_seed = dev.master_seed;
    msg.eigenvalues = dev.eig_values;
  }
  if (dev.eig_values.empty())
    throw ConsistencyError("device_round: no decomposition before first renewal");
  msg.q_prev = dev.q_prev;

  DeviceRoundOutput out;
  if (cfg.mode == Mode::kShedExact) {
    const int q_t = std::min(dev.q_prev + budget, n);
    out.exact_from = dev.q_prev;
    for (int i = dev.q_prev; i < q_t; ++i)
      out.exact_vectors.push_back(dev.eig_vectors[static_cast<std::size_t>(i)]);
    dev.q_prev = q_t;
    msg.q_t = q_t;
    msg.rho = (q_t < n) ? dev.eig_values[static_cast<std::size_t>(q_t)] : 0.0;
    msg.gradient_only = out.exact_vectors.empty();
    out.bytes = encode_update(msg);
    return out;
  }

  long capacity = 0;
  for (int i = 0; i < n; ++i) capacity += kMaxDepth - dev.depths[static_cast<std::size_t>(i)];
  const int b_eff = static_cast<int>(std::min<long>(budget, capacity));
  if (b_eff < 1) {
    msg.gradient_only = true;
    msg.q_t = dev.q_prev;
    msg.rho = (dev.q_prev < n) ? dev.eig_values[static_cast<std::size_t>(dev.q_prev)] : 0.0;
    out.bytes = encode_update(msg);
    return out;
  }

  const int q_bar = heuristic_q_bar(dev.q_prev, b_eff, n);
  std::vector<int> bits;
  if (cfg.mode == Mode::kNaiveUniform) {
    bits.assign(static_cast<std::size_t>(q_bar), b_eff / q_bar);
    for (int i = 0; i < b_eff % q_bar; ++i) ++bits[static_cast<std::size_t>(i)];
    for (int i = 0; i < q_bar; ++i) {
      const int cap = kMaxDepth - dev.depths[static_cast<std::size_t>(i)];
      bits[static_cast<std::size_t>(i)] = std::min(bits[static_cast<std::size_t>(i)], cap);
    }
  } else {
    try {
      const AllocationProblem prob =
          make_incremental_problem(dev.eig_values, dev.depths, q_bar, b_eff);
      const std::vector<double> x =
          (cfg.mode == Mode::kQshedFirstOrder) ? solve_first_order(prob) : solve_convex(prob);
      bits = round_to_bits(prob, x);
    } catch (const Infeasible&) {
      bits.clear();
    } catch (const DegenerateCoefficient&) {
      bits.clear();
    }
  }

  const int q_send = bits.empty() ? 0 : q_bar;
  for (int i = 0; i < q_send; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    if (bits[k] < 1) continue;
    if (dev.depths[k] == 0) {
      QuantizedVector qv =
          quantize(dev.eig_vectors[k], bits[k], vector_dither_seed(dev.master_seed, i));
      msg.refinements.push_back(make_refinement(qv, i, 0));
      dev.mirror[k] = std::move(qv);
    } else {
      auto [qv, ref] = refine(dev.mirror[k], dev.eig_vectors[k], bits[k], i);
      dev.mirror[k] = std::move(qv);
      msg.refinements.push_back(std::move(ref));
    }
    dev.depths[k] += bits[k];
  }
  int q_t = 0;
  for (int i = 0; i < n; ++i)
    if (dev.depths[static_cast<std::size_t>(i)] > 0) q_t = i + 1;
  dev.q_prev = q_t;
  msg.q_t = q_t;
  msg.rho = (q_t < n) ? dev.eig_values[static_cast<std::size_t>(q_t)] : 0.0;
  msg.gradient_only = msg.refinements.empty();
  out.bytes = encode_update(msg);
  return out;
}

DeviceUpdate aggregate_update(AggregatorState& agg, std::span<const std::uint8_t> bytes,
                              const DeviceRoundOutput* side_channel) {
  DeviceUpdate msg = decode_update(bytes);
  if (msg.device >= agg.devices.size()) throw ProtocolError("update from unknown device");
  MirrorState& m = agg.devices[msg.device];
  if (msg.renewal) {
    m.have_renewal = true;
    m.master_seed = msg.master_seed;
    m.eigenvalues = msg.eigenvalues;
    m.states.assign(static_cast<std::size_t>(msg.n), QuantizedVector{});
    m.exact_vectors.assign(static_cast<std::size_t>(msg.n), {});
  }
  if (!m.have_renewal) throw ProtocolError("update received before any renewal");
  if (static_cast<int>(m.eigenvalues.size()) != msg.n)
    throw ProtocolError("dimension changed between renewals");
  for (const RefinementMessage& ref : msg.refinements) {
    RefinementMessage filled = ref;
    filled.dither_seed = vector_dither_seed(m.master_seed, ref.eig_index);
    const std::size_t k = static_cast<std::size_t>(ref.eig_index);
    m.states[k] = apply_refinement(m.states[k], filled);
  }
  if (side_channel != nullptr)
    for (std::size_t k = 0; k < side_channel->exact_vectors.size(); ++k)
      m.exact_vectors[static_cast<std::size_t>(side_channel->exact_from) + k] =
          side_channel->exact_vectors[k];
  m.q_t = msg.q_t;
  m.rho = msg.rho;
  m.gradient = msg.gradient;
  return msg;
}

SymmetricMatrix assemble_device(const MirrorState& m, int n) {
  if (!m.have_renewal) throw ConsistencyError("assemble_device: no renewal received");
  if (static_cast<int>(m.eigenvalues.size()) != n)
    throw InvalidInput("assemble_device: dimension mismatch");
  std::vector<double> h(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
  for (int i = 0; i < m.q_t; ++i) {
    const std::size_t k = static_cast<std::size_t>(i);
    std::vector<double> vhat;
    if (k < m.exact_vectors.size() && !m.exact_vectors[k].empty())
      vhat = m.exact_vectors[k];
    else if (k < m.states.size() && m.states[k].depth > 0)
      vhat = dequantize(m.states[k]);
    else
      continue;  // never transmitted: contributes as the zero vector
    const double w = std::max(0.0, m.eigenvalues[k] - m.rho);
    if (w == 0.0) continue;
    for (int r = 0; r < n; ++r) {
      const double vr = w * vhat[static_cast<std::size_t>(r)];
      for (int c = r; c < n; ++c)
        h[static_cast<std::size_t>(r) * n + c] += vr * vhat[static_cast<std::size_t>(c)];
    }
  }
  for (int r = 0; r < n; ++r) {
    h[static_cast<std::size_t>(r) * n + r] += m.rho;
    for (int c = r + 1; c < n; ++c)
      h[static_cast<std::size_t>(c) * n + r] = h[static_cast<std::size_t>(r) * n + c];
  }
  return SymmetricMatrix(n, h);
}

std::vector<double> newton_direction(const SymmetricMatrix& hessian, std::span<const double> grad,
                                     double jitter) {
  const int n = hessian.dim();
  if (static_cast<int>(grad.size()) != n)
    throw InvalidInput("newton_direction: gradient size mismatch");
  try {
    return cholesky_solve(hessian, grad);
  } catch (const NumericalFailure&) {
    // one retry with the configured jitter, then give up
    SymmetricMatrix a = hessian;
    for (int i = 0; i < n; ++i) a.set(i, i, hessian(i, i) + std::max(jitter, 0.0));
    return cholesky_solve(a, grad);
  }
}

double armijo_eta(const Objective& pooled, std::span<const double> theta,
                  std::span<const double> grad, std::span<const double> direction) {
  if (grad.size() != theta.size() || direction.size() != theta.size())
    throw InvalidInput("armijo_eta: size mismatch");
  double descent = 0.0;
  for (std::size_t j = 0; j < grad.size(); ++j) descent += grad[j] * direction[j];
  if (!(descent > 0.0))
    throw NumericalFailure("armijo_eta: not a descent direction", descent);
  const double f0 = pooled.value(theta);
  double eta = 1.0;
  std::vector<double> trial(theta.size());
  for (int k = 0; k < 50; ++k) {
    for (std::size_t j = 0; j < trial.size(); ++j) trial[j] = theta[j] - eta * direction[j];
    if (pooled.value(trial) <= f0 - 1e-4 * eta * descent) return eta;
    eta *= 0.5;
  }
  return eta;
}

double quantization_spectral_norm(std::span<const double> v, std::span<const double> vhat) {
  if (v.size() != vhat.size() || v.empty())
    throw InvalidInput("quantization_spectral_norm: size mismatch");
  double alpha = 0.0, hh = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    alpha += v[j] * vhat[j];
    hh += vhat[j] * vhat[j];
  }
  // vhat = alpha v + beta w with unit w orthogonal to unit v; the difference
  // of outer products acts on span{v, w}
  const double beta2 = std::max(0.0, hh - alpha * alpha);
  const double tr = 1.0 - alpha * alpha - beta2;
  const double disc = std::sqrt(tr * tr + 4.0 * beta2);
  return std::max(std::abs(0.5 * (tr + disc)), std::abs(0.5 * (tr - disc)));
}

double quantization_frobenius_norm(std::span<const double> v, std::span<const double> vhat) {
  if (v.size() != vhat.size() || v.empty())
    throw InvalidInput("quantization_frobenius_norm: size mismatch");
  double alpha = 0.0, hh = 0.0, vv = 0.0;
  for (std::size_t j = 0; j < v.size(); ++j) {
    alpha += v[j] * vhat[j];
    hh += vhat[j] * vhat[j];
    vv += v[j] * v[j];
  }
  return std::sqrt(std::max(0.0, vv * vv + hh * hh - 2.0 * alpha * alpha));
}

double convergence_bound(double lambda_min, double quant_error, double rho_bar) {
  if (rho_bar > 0.0) return 1.0 - (lambda_min - quant_error) / rho_bar;
  return (lambda_min > 0.0) ? quant_error / lambda_min : 1.0;
}

RunResult run(const RunConfig& cfg) {
  check_config(cfg);

  std::vector<Dataset> datasets;
  if (!cfg.csv_paths.empty()) {
    datasets.reserve(cfg.csv_paths.size());
    for (const std::string& path : cfg.csv_paths) datasets.push_back(load_csv(path));
  } else {
    SyntheticSpec spec;
    spec.devices = cfg.devices;
    spec.samples_per_device = cfg.samples_per_device;
    spec.dim = cfg.dim;
    spec.kind = cfg.objective;
    spec.condition = cfg.condition;
    spec.noise = cfg.noise;
    spec.feature_shift = cfg.feature_shift;
    spec.label_skew = cfg.label_skew;
    spec.seed = mix_seed(cfg.seed, kSeedTag);
    datasets = generate_synthetic(spec);
  }
  const int n = datasets.front().dim();
  for (const Dataset& d : datasets)
    if (d.dim() != n) throw InvalidInput("run: datasets disagree on dimension");

  std::vector<DeviceState> devices;
  devices.reserve(static_cast<std::size_t>(cfg.devices));
  double total_samples = 0.0;
  for (int d = 0; d < cfg.devices; ++d) {
    devices.emplace_back(d, Objective(cfg.objective, datasets[static_cast<std::size_t>(d)], cfg.l2));
    total_samples += datasets[static_cast<std::size_t>(d)].size();
  }
  std::vector<double> weight(static_cast<std::size_t>(cfg.devices));
  for (int d = 0; d < cfg.devices; ++d)
    weight[static_cast<std::size_t>(d)] = datasets[static_cast<std::size_t>(d)].size() / total_samples;
  const Objective pooled(cfg.objective, pool(datasets), cfg.l2);

  AggregatorState agg;
  agg.theta.assign(static_cast<std::size_t>(n), 0.0);
  agg.devices.resize(static_cast<std::size_t>(cfg.devices));

  RunResult res;
  std::uint64_t bits_cum = 0;
  double last_eta = 0.0;

  for (int t = 1; t <= cfg.max_rounds; ++t) {
    const bool renewal = ((t - 1) % cfg.renewal_period) == 0;
    std::vector<int> budgets(static_cast<std::size_t>(cfg.devices));
    for (int d = 0; d < cfg.devices; ++d)
      budgets[static_cast<std::size_t>(d)] = channel_budget(cfg.channel, cfg.budget_mean,
                                                            cfg.seed, t, d);

    Broadcast bc;
    bc.round = static_cast<std::uint32_t>(t);
    bc.n = n;
    bc.eta = last_eta;
    bc.theta = agg.theta;
    const Broadcast rx = decode_broadcast(encode_broadcast(bc));

    std::vector<DeviceRoundOutput> outs(static_cast<std::size_t>(cfg.devices));
    if (cfg.threads > 1 && cfg.devices > 1) {
      std::atomic<int> next{0};
      std::exception_ptr first_error;
      std::mutex error_mutex;
      auto worker = [&]() {
        for (;;) {
          const int d = next.fetch_add(1);
          if (d >= cfg.devices) return;
          try {
            outs[static_cast<std::size_t>(d)] =
                device_round(devices[static_cast<std::size_t>(d)], cfg, rx.theta, t,
                             budgets[static_cast<std::size_t>(d)], renewal);
          } catch (...) {
            const std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) first_error = std::current_exception();
          }
        }
      };
      std::vector<std::thread> pool_threads;
      const int nthreads = std::min(cfg.threads, cfg.devices);
      pool_threads.reserve(static_cast<std::size_t>(nthreads));
      for (int k = 0; k < nthreads; ++k) pool_threads.emplace_back(worker);
      for (std::thread& th : pool_threads) th.join();
      if (first_error) std::rethrow_exception(first_error);
    } else {
      for (int d = 0; d < cfg.devices; ++d)
        outs[static_cast<std::size_t>(d)] =
            device_round(devices[static_cast<std::size_t>(d)], cfg, rx.theta, t,
                         budgets[static_cast<std::size_t>(d)], renewal);
    }

    std::uint64_t bits_round = 0, bytes_raw = 0;
    std::vector<double> gbar(static_cast<std::size_t>(n), 0.0);
    std::vector<double> hbar(static_cast<std::size_t>(n) * static_cast<std::size_t>(n), 0.0);
    double q_sum = 0.0, rho_bar = 0.0;
    for (int d = 0; d < cfg.devices; ++d) {
      const std::size_t kd = static_cast<std::size_t>(d);
      const DeviceUpdate msg = aggregate_update(agg, outs[kd].bytes, &outs[kd]);
      bytes_raw += outs[kd].bytes.size() +
                   8u * static_cast<std::uint64_t>(n) *
                       static_cast<std::uint64_t>(outs[kd].exact_vectors.size());
      if (cfg.mode == Mode::kShedExact)
        bits_round += 64u * static_cast<std::uint64_t>(n) *
                      static_cast<std::uint64_t>(outs[kd].exact_vectors.size());
      else
        bits_round += payload_bits(msg);
      const SymmetricMatrix hd = assemble_device(agg.devices[kd], n);
      const double w = weight[kd];
      for (std::size_t e = 0; e < hbar.size(); ++e) hbar[e] += w * hd.data()[e];
      for (int j = 0; j < n; ++j)
        gbar[static_cast<std::size_t>(j)] += w * agg.devices[kd].gradient[static_cast<std::size_t>(j)];
      q_sum += agg.devices[kd].q_t;
      rho_bar += w * agg.devices[kd].rho;
    }
    const SymmetricMatrix hhat(n, hbar);

    // diagnostics: contraction bound from the true pooled curvature and the
    // exact per-eigenvector reconstruction errors
    const SymmetricMatrix htrue = pooled.hessian(rx.theta);
    const EigenDecomposition etrue = eigendecompose(htrue);
    const double lambda_min = etrue.values.back();
    double e_spec = 0.0, e_frob = 0.0;
    for (int d = 0; d < cfg.devices; ++d) {
      const std::size_t kd = static_cast<std::size_t>(d);
      const MirrorState& m = agg.devices[kd];
      double dev_spec = 0.0, dev_frob = 0.0;
      for (int i = 0; i < m.q_t; ++i) {
        const std::size_t ki = static_cast<std::size_t>(i);
        const double lb = std::max(0.0, m.eigenvalues[ki] - m.rho);
        if (lb == 0.0) continue;
        if (ki < m.exact_vectors.size() && !m.exact_vectors[ki].empty()) continue;
        const std::vector<double>& v = devices[kd].eig_vectors[ki];
        if (ki < m.states.size() && m.states[ki].depth > 0) {
          const std::vector<double> vhat = dequantize(m.states[ki]);
          dev_spec += lb * quantization_spectral_norm(v, vhat);
          dev_frob += lb * quantization_frobenius_norm(v, vhat);
        } else {
          dev_spec += lb;  // zero vector stands in: || v v^T || = 1 in both norms
          dev_frob += lb;
        }
      }
      e_spec += weight[kd] * dev_spec;
      e_frob += weight[kd] * dev_frob;
    }
    const double kappa = convergence_bound(lambda_min, e_spec, rho_bar);

    const std::vector<double> dir = newton_direction(hhat, gbar, cfg.jitter);
    const double eta = armijo_eta(pooled, rx.theta, gbar, dir);
    last_eta = eta;
    for (int j = 0; j < n; ++j) agg.theta[static_cast<std::size_t>(j)] -= eta * dir[static_cast<std::size_t>(j)];
    agg.round = t;

    RoundMetrics row;
    row.round = t;
    row.loss = pooled.value(agg.theta);
    const std::vector<double> gnew = pooled.gradient(agg.theta);
    row.grad_norm = std::sqrt(std::inner_product(gnew.begin(), gnew.end(), gnew.begin(), 0.0));
    row.eta = eta;
    row.q_mean = q_sum / cfg.devices;
    row.bits_round = bits_round;
    bits_cum += bits_round;
    row.bits_cum = bits_cum;
    row.bytes_raw = bytes_raw;
    row.e_spec = e_spec;
    row.e_frob = e_frob;
    row.kappa = kappa;
    res.metrics.push_back(row);

    if (row.grad_norm <= cfg.tolerance) {
      res.converged = true;
      res.rounds = t;
      break;
    }
  }
  if (!res.converged) res.rounds = cfg.max_rounds;
  res.theta = agg.theta;

  Broadcast done;
  done.round = static_cast<std::uint32_t>(res.rounds);
  done.n = n;
  done.eta = last_eta;
  done.terminate = true;
  done.theta = res.theta;
  if (decode_broadcast(encode_broadcast(done)).terminate != true)
    throw ConsistencyError("terminate broadcast failed to round-trip");
  return res;
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& metrics) {
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (f == nullptr) throw InvalidInput("cannot open for writing: " + path);
  std::fputs("round,loss,grad_norm,eta,q_mean,bits_round,bits_cum,bytes_raw,e_spec,e_frob,kappa\n",
             f);
  for (const RoundMetrics& m : metrics)
    std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g,%llu,%llu,%llu,%.17g,%.17g,%.17g\n", m.round,
                 m.loss, m.grad_norm, m.eta, m.q_mean,
                 static_cast<unsigned long long>(m.bits_round),
                 static_cast<unsigned long long>(m.bits_cum),
                 static_cast<unsigned long long>(m.bytes_raw), m.e_spec, m.e_frob, m.kappa);
  std::fclose(f);
}

}  // namespace qshed
