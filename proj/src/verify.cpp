#include "qshed/verify.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "qshed/alloc.hpp"
#include "qshed/eigen.hpp"
#include "qshed/errors.hpp"
#include "qshed/matrix.hpp"
#include "qshed/objectives.hpp"
#include "qshed/oracle.hpp"
#include "qshed/protocol.hpp"
#include "qshed/quantize.hpp"
#include "qshed/rng.hpp"
#include "qshed/simnet.hpp"

namespace qshed {

namespace {

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<double> random_spectrum(SplitMix64& g, int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  for (double& x : v) x = 0.05 + 3.0 * g.next_unit();
  std::sort(v.begin(), v.end(), std::greater<double>());
  return v;
}

std::vector<CheckResult> quantizer_suite(bool force) {
  std::vector<CheckResult> out;

  {  // reconstruction error moments at a fixed depth
    const int bits = 2, dim = 16, vectors = 12500;
    const double delta = interval_length(bits);
    double sum2 = 0.0, sum4 = 0.0;
    long count = 0;
    SplitMix64 g(2024);
    for (int k = 0; k < vectors; ++k) {
      std::vector<double> v(dim);
      for (double& x : v) x = g.next_centered();  // stay clear of saturation
      const QuantizedVector qv = quantize(v, bits, g.next_u64());
      const std::vector<double> vhat = dequantize(qv);
      for (int j = 0; j < dim; ++j) {
        const double e = vhat[static_cast<std::size_t>(j)] - v[static_cast<std::size_t>(j)];
        sum2 += e * e;
        sum4 += e * e * e * e;
        ++count;
      }
    }
    const double var = sum2 / count;
    const double m4 = sum4 / count;
    const double var_ref = (force ? delta * delta / 10.0 : delta * delta / 12.0);
    const double m4_ref = delta * delta * delta * delta / 80.0;
    const bool ok = std::abs(var - var_ref) <= 0.03 * var_ref && std::abs(m4 - m4_ref) <= 0.06 * m4_ref;
    out.push_back({"dither-moments", ok,
                   "var " + fmt(var) + " vs " + fmt(var_ref) + ", m4 " + fmt(m4) + " vs " +
                       fmt(m4_ref)});
  }

  {  // refining in stages lands on the same bits as quantizing once
    bool ok = true;
    SplitMix64 g(77);
    for (int k = 0; k < 2000 && ok; ++k) {
      std::vector<double> v(8);
      for (double& x : v) x = 2.0 * g.next_unit() - 1.0;
      const std::uint64_t seed = g.next_u64();
      QuantizedVector staged = quantize(v, 2, seed);
      staged = refine(staged, v, 1, 0).first;
      staged = refine(staged, v, 2, 0).first;
      const QuantizedVector direct = quantize(v, 5, seed);
      ok = staged.cells == direct.cells && dequantize(staged) == dequantize(direct);
    }
    out.push_back({"staged-equals-direct", ok, "2000 vectors, depths 2+1+2 vs 5"});
  }

  {  // earlier transmitted bits are a prefix of the deeper cell index
    bool ok = true;
    SplitMix64 g(91);
    for (int k = 0; k < 2000 && ok; ++k) {
      std::vector<double> v(6);
      for (double& x : v) x = 2.0 * g.next_unit() - 1.0;
      const std::uint64_t seed = g.next_u64();
      const QuantizedVector coarse = quantize(v, 3, seed);
      const QuantizedVector fine = quantize(v, 5, seed);
      for (std::size_t j = 0; j < v.size(); ++j)
        if ((fine.cells[j] >> 2) != coarse.cells[j]) ok = false;
    }
    out.push_back({"prefix-property", ok, "depth-5 cells shifted right match depth-3 cells"});
  }
  return out;
}

std::vector<CheckResult> error_model_suite(bool force) {
  std::vector<CheckResult> out;
  SplitMix64 g(5150);
  bool mc_ok = true, dual_ok = true;
  std::string mc_detail, dual_detail;
  for (int inst = 0; inst < 4; ++inst) {
    const int n = 6 + inst;
    const int q = 2 + inst % 2;
    std::vector<double> values = random_spectrum(g, n);

    std::vector<std::vector<double>> vectors(static_cast<std::size_t>(n),
                                             std::vector<double>(static_cast<std::size_t>(n), 0.0));
    for (int i = 0; i < n; ++i) vectors[static_cast<std::size_t>(i)][static_cast<std::size_t>(i)] = 1.0;
    for (int rot = 0; rot < 4 * n; ++rot) {
      const int a = static_cast<int>(g.next_u64() % static_cast<std::uint64_t>(n));
      int b = static_cast<int>(g.next_u64() % static_cast<std::uint64_t>(n - 1));
      if (b >= a) ++b;
      const double ang = 6.283185307179586 * g.next_unit();
      const double c = std::cos(ang), s = std::sin(ang);
      for (int j = 0; j < n; ++j) {
        const double va = vectors[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)];
        const double vb = vectors[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)];
        vectors[static_cast<std::size_t>(a)][static_cast<std::size_t>(j)] = c * va - s * vb;
        vectors[static_cast<std::size_t>(b)][static_cast<std::size_t>(j)] = s * va + c * vb;
      }
    }

    std::vector<int> bits(static_cast<std::size_t>(q));
    for (int& b : bits) b = 1 + static_cast<int>(g.next_u64() % 3);

    const AllocationProblem prob = make_problem(values, q, std::accumulate(bits.begin(), bits.end(), 0));
    double formula = expected_error_bits(prob, bits);
    const double reference = oracle::reference_error(values, q, bits);
    if (std::abs(formula - reference) > 1e-12 * std::max(1.0, reference)) {
      dual_ok = false;
      dual_detail = "instance " + std::to_string(inst);
    }
    if (force) formula *= 1.05;
    const oracle::McResult mc = oracle::mc_frobenius_error(values, vectors, q, bits, 20000, 99 + inst);
    const double tol = std::max(4.0 * mc.std_error, 0.02 * formula);
    if (std::abs(formula - mc.mean) > tol) {
      mc_ok = false;
      mc_detail = "instance " + std::to_string(inst) + ": formula " + fmt(formula) + " mc " +
                  fmt(mc.mean) + " se " + fmt(mc.std_error);
    }
  }
  out.push_back({"formula-grouping", dual_ok, dual_ok ? "two evaluation routes agree" : dual_detail});
  out.push_back({"mc-vs-formula", mc_ok, mc_ok ? "4 instances within tolerance" : mc_detail});
  return out;
}

std::vector<CheckResult> allocator_suite(bool force) {
  std::vector<CheckResult> out;
  SplitMix64 g(4242);

  {
    bool ok = true;
    std::string detail = "3 instances, q in {2,3}";
    for (int inst = 0; inst < 3 && ok; ++inst) {
      const int n = 6;
      const int q = 2 + inst % 2;
      const int budget = q + 2 + inst;
      const std::vector<double> values = random_spectrum(g, n);
      const AllocationProblem prob = make_problem(values, q, budget);
      const std::vector<double> x = solve_convex(prob);
      const double cost = expected_error(prob, x);
      const oracle::GridResult grid = oracle::grid_search_alloc(values, q, budget, 33, 6);
      if (std::abs(cost - grid.cost) > 1e-6 * std::max(1.0, grid.cost)) {
        ok = false;
        detail = "cost " + fmt(cost) + " vs grid " + fmt(grid.cost);
      }
    }
    out.push_back({"newton-vs-grid", ok, detail});
  }

  {
    bool ok = true;
    std::string detail = "20 instances";
    for (int inst = 0; inst < 20 && ok; ++inst) {
      const int n = 5 + static_cast<int>(g.next_u64() % 5);
      const int q = 2 + static_cast<int>(g.next_u64() % 3);
      const int budget = q + static_cast<int>(g.next_u64() % 8);
      const std::vector<double> values = random_spectrum(g, n);
      AllocationProblem prob = make_problem(values, q, budget);
      const std::vector<double> x = solve_first_order(prob);
      if (force) prob.gamma[0] *= 2.0;
      double level = 0.0, sum_bits = 0.0;
      int free_count = 0;
      for (int i = 0; i < q; ++i) {
        sum_bits += bits_from_x(x[static_cast<std::size_t>(i)]);
        if (x[static_cast<std::size_t>(i)] < 4.0 - 1e-9) {
          level += prob.gamma[static_cast<std::size_t>(i)] * x[static_cast<std::size_t>(i)];
          ++free_count;
        }
      }
      level /= std::max(free_count, 1);
      for (int i = 0; i < q && ok; ++i) {
        const std::size_t k = static_cast<std::size_t>(i);
        if (x[k] < 4.0 - 1e-9) {
          if (std::abs(prob.gamma[k] * x[k] - level) > 1e-10 * std::max(1.0, level)) ok = false;
        } else {
          if (prob.gamma[k] * 4.0 > level * (1.0 + 1e-9) + 1e-12) ok = false;
        }
        if (i > 0 && x[k] < x[static_cast<std::size_t>(i - 1)] - 1e-9) ok = false;
      }
      if (std::abs(sum_bits - budget) > 1e-8) ok = false;
      if (!ok) detail = "instance " + std::to_string(inst);
    }
    out.push_back({"first-order-kkt", ok, detail});
  }

  {
    bool ok = true;
    std::string detail = "3 instances";
    for (int inst = 0; inst < 3 && ok; ++inst) {
      const int n = 7;
      const int q = 3 + inst;
      const int budget = q + 3;
      const std::vector<double> values = random_spectrum(g, n);
      const AllocationProblem prob = make_problem(values, q, budget);
      const std::vector<int> bits = round_to_bits(prob, solve_convex(prob));
      const oracle::IntegerResult ref = oracle::exhaustive_integer_alloc(values, q, budget);
      const double mine = expected_error_bits(prob, bits);
      if (mine > 1.05 * ref.cost) {
        ok = false;
        detail = "rounded " + fmt(mine) + " vs best " + fmt(ref.cost);
      }
    }
    out.push_back({"rounding-vs-exhaustive", ok, detail});
  }
  return out;
}

std::vector<CheckResult> protocol_suite(bool force) {
  std::vector<CheckResult> out;
  SplitMix64 g(31337);

  {
    bool ok = true;
    for (int k = 0; k < 1000 && ok; ++k) {
      DeviceUpdate msg;
      msg.device = static_cast<std::uint32_t>(g.next_u64());
      msg.round = static_cast<std::uint32_t>(g.next_u64() % 10000);
      msg.n = 2 + static_cast<int>(g.next_u64() % 12);
      msg.renewal = (g.next_u64() & 1) != 0;
      msg.q_prev = static_cast<int>(g.next_u64() % (msg.n + 1));
      msg.q_t = static_cast<int>(g.next_u64() % (msg.n + 1));
      msg.rho = g.next_unit();
      msg.master_seed = g.next_u64();
      msg.gradient.resize(static_cast<std::size_t>(msg.n));
      for (double& v : msg.gradient) v = 2.0 * g.next_unit() - 1.0;
      if (msg.renewal) {
        msg.eigenvalues.resize(static_cast<std::size_t>(msg.n));
        for (double& v : msg.eigenvalues) v = g.next_unit();
      }
      const int nref = static_cast<int>(g.next_u64() % 4);
      for (int r = 0; r < nref; ++r) {
        RefinementMessage ref;
        ref.eig_index = static_cast<int>(g.next_u64() % static_cast<std::uint64_t>(msg.n));
        ref.added_bits = 1 + static_cast<int>(g.next_u64() % 6);
        ref.prev_depth = static_cast<int>(g.next_u64() % 4);
        ref.subcells.resize(static_cast<std::size_t>(msg.n));
        for (std::uint64_t& c : ref.subcells) c = g.next_u64() & ((1u << ref.added_bits) - 1);
        msg.refinements.push_back(std::move(ref));
      }
      msg.gradient_only = msg.refinements.empty() && (g.next_u64() & 1) != 0;
      const std::vector<std::uint8_t> bytes = encode_update(msg);
      const DeviceUpdate back = decode_update(bytes);
      ok = encode_update(back) == bytes;
    }
    out.push_back({"roundtrip-fuzz", ok, "1000 random update messages"});
  }

  {
    DeviceUpdate msg;
    msg.device = 3;
    msg.round = 9;
    msg.n = 4;
    msg.q_prev = 0;
    msg.q_t = 1;
    msg.rho = 0.25;
    msg.gradient = {0.1, -0.2, 0.3, -0.4};
    RefinementMessage ref;
    ref.eig_index = 0;
    ref.added_bits = 2;
    ref.prev_depth = 0;
    ref.subcells = {1, 2, 3, 0};
    msg.refinements.push_back(ref);
    std::vector<std::uint8_t> bytes = encode_update(msg);
    bool rejected = false;
    std::vector<std::uint8_t> bad = bytes;
    bad[1] = 'X';  // corrupt the magic
    try {
      (void)decode_update(bad);
    } catch (const ProtocolError&) {
      rejected = true;
    }
    bool truncated_rejected = false;
    try {
      (void)decode_update(std::span<const std::uint8_t>(bytes.data(), bytes.size() - 3));
    } catch (const ProtocolError&) {
      truncated_rejected = true;
    }
    const bool ok = force ? !(rejected && truncated_rejected) : (rejected && truncated_rejected);
    out.push_back({"tamper-rejected", ok, "bad magic and truncation both refused"});
  }

  {
    // single eigenvector streamed over several rounds; the receiver state
    // rebuilt from bytes must reproduce the sender's reconstruction exactly
    bool ok = true;
    std::vector<double> v(6);
    for (double& x : v) x = 2.0 * g.next_unit() - 1.0;
    const std::uint64_t seed = g.next_u64();
    QuantizedVector sender = quantize(v, 1, seed);
    QuantizedVector receiver;
    {
      RefinementMessage first = make_refinement(sender, 0, 0);
      DeviceUpdate msg;
      msg.device = 0;
      msg.round = 1;
      msg.n = 6;
      msg.q_t = 1;
      msg.rho = 0.0;
      msg.gradient.assign(6, 0.0);
      msg.refinements.push_back(first);
      const DeviceUpdate rx = decode_update(encode_update(msg));
      RefinementMessage filled = rx.refinements.front();
      filled.dither_seed = seed;
      receiver = apply_refinement(QuantizedVector{}, filled);
    }
    for (int round = 2; round <= 20 && ok; ++round) {
      const int add = 1 + static_cast<int>(g.next_u64() % 3);
      if (sender.depth + add > 30) break;
      auto [next, ref] = refine(sender, v, add, 0);
      sender = next;
      DeviceUpdate msg;
      msg.device = 0;
      msg.round = static_cast<std::uint32_t>(round);
      msg.n = 6;
      msg.q_t = 1;
      msg.rho = 0.0;
      msg.gradient.assign(6, 0.0);
      msg.refinements.push_back(ref);
      const DeviceUpdate rx = decode_update(encode_update(msg));
      RefinementMessage filled = rx.refinements.front();
      filled.dither_seed = seed;
      receiver = apply_refinement(receiver, filled);
      ok = receiver.cells == sender.cells && dequantize(receiver) == dequantize(sender);
    }
    out.push_back({"mirror-consistency", ok, "receiver tracks sender bit for bit"});
  }
  return out;
}

std::vector<CheckResult> convergence_suite(bool force) {
  std::vector<CheckResult> out;

  {
    RunConfig cfg;
    cfg.mode = Mode::kShedExact;
    cfg.objective = ObjectiveKind::kLeastSquares;
    cfg.devices = 1;
    cfg.dim = 8;
    cfg.samples_per_device = 200;
    cfg.budget_mean = 8;  // full rank in one round
    cfg.max_rounds = 1;
    cfg.tolerance = 1e-12;
    cfg.l2 = 1e-2;
    cfg.noise = 0.05;
    cfg.seed = 11;
    const RunResult first = run(cfg);

    SyntheticSpec spec;
    spec.devices = 1;
    spec.samples_per_device = cfg.samples_per_device;
    spec.dim = cfg.dim;
    spec.kind = cfg.objective;
    spec.condition = cfg.condition;
    spec.noise = cfg.noise;
    spec.seed = mix_seed(cfg.seed, 0x71736864ULL);
    const Objective pooled(cfg.objective, pool(generate_synthetic(spec)), cfg.l2);
    const SymmetricMatrix h = pooled.hessian(std::vector<double>(8, 0.0));
    std::vector<double> g0 = pooled.gradient(std::vector<double>(8, 0.0));
    for (double& v : g0) v = -v;
    const std::vector<double> star = cholesky_solve(h, g0);
    double dist = 0.0;
    for (std::size_t j = 0; j < star.size(); ++j) {
      const double dlt = first.theta[j] - star[j];
      dist += dlt * dlt;
    }
    dist = std::sqrt(dist);
    const double tol = force ? 1e-18 : 1e-8;
    out.push_back({"exact-newton-one-step", dist <= tol,
                   "distance to optimum after one full-rank round: " + fmt(dist)});
  }

  {
    RunConfig cfg;
    cfg.mode = Mode::kQshed;
    cfg.objective = ObjectiveKind::kLeastSquares;
    cfg.devices = 3;
    cfg.dim = 12;
    cfg.samples_per_device = 150;
    cfg.budget_mean = 6;
    cfg.max_rounds = 120;
    cfg.renewal_period = 15;
    cfg.tolerance = 1e-7;
    cfg.seed = 5;
    const RunResult res = run(cfg);
    out.push_back({"quantized-run-converges", res.converged,
                   "gradient norm target reached in " + std::to_string(res.rounds) + " rounds"});
  }
  return out;
}

}  // namespace

std::vector<std::string> verify_suite_names() {
  return {"quantizer", "error-model", "allocator", "protocol", "convergence"};
}

std::vector<CheckResult> run_verify_suite(const std::string& suite, bool force_failure) {
  if (suite == "quantizer") return quantizer_suite(force_failure);
  if (suite == "error-model") return error_model_suite(force_failure);
  if (suite == "allocator") return allocator_suite(force_failure);
  if (suite == "protocol") return protocol_suite(force_failure);
  if (suite == "convergence") return convergence_suite(force_failure);
  if (suite == "all") {
    std::vector<CheckResult> out;
    for (const std::string& name : verify_suite_names()) {
      std::vector<CheckResult> part = run_verify_suite(name, force_failure);
      out.insert(out.end(), part.begin(), part.end());
    }
    return out;
  }
  throw InvalidInput("unknown verify suite: " + suite);
}

}  // namespace qshed
