#include <pybind11/operators.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "qshed/alloc.hpp"
#include "qshed/config.hpp"
#include "qshed/eigen.hpp"
#include "qshed/errors.hpp"
#include "qshed/matrix.hpp"
#include "qshed/objectives.hpp"
#include "qshed/oracle.hpp"
#include "qshed/protocol.hpp"
#include "qshed/quantize.hpp"
#include "qshed/simnet.hpp"
#include "qshed/verify.hpp"

namespace py = pybind11;
using namespace qshed;

namespace {

SymmetricMatrix matrix_from_rows(const std::vector<std::vector<double>>& rows) {
  const int n = static_cast<int>(rows.size());
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(n) * static_cast<std::size_t>(n));
  for (const auto& row : rows) {
    if (static_cast<int>(row.size()) != n)
      throw InvalidInput("matrix rows must form a square array");
    flat.insert(flat.end(), row.begin(), row.end());
  }
  return SymmetricMatrix(n, flat);
}

std::vector<std::vector<double>> rows_from_matrix(const SymmetricMatrix& m) {
  std::vector<std::vector<double>> rows(static_cast<std::size_t>(m.dim()));
  for (int i = 0; i < m.dim(); ++i) {
    rows[static_cast<std::size_t>(i)].resize(static_cast<std::size_t>(m.dim()));
    for (int j = 0; j < m.dim(); ++j) rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = m(i, j);
  }
  return rows;
}

py::bytes to_bytes(const std::vector<std::uint8_t>& v) {
  return py::bytes(reinterpret_cast<const char*>(v.data()), v.size());
}

std::vector<std::uint8_t> from_bytes(const py::bytes& b) {
  const std::string s = b;
  return std::vector<std::uint8_t>(s.begin(), s.end());
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Communication-efficient distributed Newton optimization with "
            "incrementally quantized Hessian eigenvectors";

  auto err = py::register_exception<Error>(m, "Error", PyExc_RuntimeError);
  py::register_exception<InvalidInput>(m, "InvalidInput", err);
  py::register_exception<NumericalFailure>(m, "NumericalFailure", err);
  py::register_exception<ProtocolError>(m, "ProtocolError", err);
  py::register_exception<ConsistencyError>(m, "ConsistencyError", err);
  py::register_exception<Infeasible>(m, "Infeasible", err);
  py::register_exception<DegenerateCoefficient>(m, "DegenerateCoefficient", err);
  py::register_exception<Unsupported>(m, "Unsupported", err);

  m.attr("version") = std::string(kVersionString);
  m.attr("MAX_DEPTH") = kMaxDepth;

  // eigcore
  py::class_<EigenDecomposition>(m, "EigenDecomposition")
      .def_readonly("values", &EigenDecomposition::values)
      .def_readonly("vectors", &EigenDecomposition::vectors)
      .def_property_readonly("dim", &EigenDecomposition::dim);
  m.def("eigendecompose",
        [](const std::vector<std::vector<double>>& rows) { return eigendecompose(matrix_from_rows(rows)); },
        py::arg("matrix"), "Full symmetric eigendecomposition, values descending.");
  m.def("assemble_approx",
        [](const EigenDecomposition& eig, int q, const std::vector<std::vector<double>>& vectors) {
          return rows_from_matrix(assemble_approx(eig, q, vectors));
        },
        py::arg("eig"), py::arg("q"), py::arg("vectors"),
        "Low-rank-plus-identity reconstruction from q retained vectors.");
  m.def("approx_rho", &approx_rho, py::arg("eig"), py::arg("q"));
  m.def("frobenius_error_sq",
        [](const std::vector<std::vector<double>>& a, const std::vector<std::vector<double>>& b) {
          return frobenius_error_sq(matrix_from_rows(a), matrix_from_rows(b));
        },
        py::arg("h"), py::arg("h_approx"));
  m.def("cholesky_solve",
        [](const std::vector<std::vector<double>>& rows, const std::vector<double>& b) {
          return cholesky_solve(matrix_from_rows(rows), b);
        },
        py::arg("matrix"), py::arg("rhs"));

  // dithered quantizer
  py::class_<QuantizedVector>(m, "QuantizedVector")
      .def(py::init<>())
      .def_readwrite("dim", &QuantizedVector::dim)
      .def_readwrite("depth", &QuantizedVector::depth)
      .def_readwrite("stages", &QuantizedVector::stages)
      .def_readwrite("dither_seed", &QuantizedVector::dither_seed)
      .def_readwrite("cells", &QuantizedVector::cells)
      .def(py::self == py::self);
  py::class_<RefinementMessage>(m, "RefinementMessage")
      .def(py::init<>())
      .def_readwrite("eig_index", &RefinementMessage::eig_index)
      .def_readwrite("added_bits", &RefinementMessage::added_bits)
      .def_readwrite("prev_depth", &RefinementMessage::prev_depth)
      .def_readwrite("dither_seed", &RefinementMessage::dither_seed)
      .def_readwrite("subcells", &RefinementMessage::subcells)
      .def(py::self == py::self);
  m.def("interval_length", &interval_length, py::arg("bits"));
  m.def("vector_dither_seed", &vector_dither_seed, py::arg("master_seed"), py::arg("eig_index"));
  m.def("generate_dither", &generate_dither, py::arg("dither_seed"), py::arg("dim"));
  m.def("quantize",
        [](const std::vector<double>& v, int bits, std::uint64_t dither_seed) {
          return quantize(v, bits, dither_seed);
        },
        py::arg("v"), py::arg("bits"), py::arg("dither_seed"));
  m.def("dequantize", &dequantize, py::arg("qv"));
  m.def("refine",
        [](const QuantizedVector& qv, const std::vector<double>& v, int added_bits, int eig_index) {
          return refine(qv, v, added_bits, eig_index);
        },
        py::arg("qv"), py::arg("v"), py::arg("added_bits"), py::arg("eig_index"),
        "Extends qv by added_bits; returns (state, message).");
  m.def("make_refinement", &make_refinement, py::arg("qv"), py::arg("eig_index"), py::arg("prev_depth"));
  m.def("apply_refinement", &apply_refinement, py::arg("receiver"), py::arg("msg"));

  // bit allocation
  py::class_<AllocationProblem>(m, "AllocationProblem")
      .def(py::init<>())
      .def_readwrite("n", &AllocationProblem::n)
      .def_readwrite("q", &AllocationProblem::q)
      .def_readwrite("budget", &AllocationProblem::budget)
      .def_readwrite("rho", &AllocationProblem::rho)
      .def_readwrite("a1", &AllocationProblem::a1)
      .def_readwrite("a2", &AllocationProblem::a2)
      .def_readwrite("a3", &AllocationProblem::a3)
      .def_readwrite("d_q", &AllocationProblem::d_q)
      .def_readwrite("tail", &AllocationProblem::tail)
      .def_readwrite("gamma", &AllocationProblem::gamma)
      .def_readwrite("ell", &AllocationProblem::ell)
      .def_readwrite("prev_bits", &AllocationProblem::prev_bits);
  py::class_<AllocationChoice>(m, "AllocationChoice")
      .def_readonly("q", &AllocationChoice::q)
      .def_readonly("bits", &AllocationChoice::bits)
      .def_readonly("x", &AllocationChoice::x)
      .def_readonly("cost", &AllocationChoice::cost);
  py::class_<IncrementalPlan>(m, "IncrementalPlan")
      .def_readonly("q_bar", &IncrementalPlan::q_bar)
      .def_readonly("q_t", &IncrementalPlan::q_t)
      .def_readonly("bits", &IncrementalPlan::bits)
      .def_readonly("x", &IncrementalPlan::x)
      .def_readonly("predicted_error", &IncrementalPlan::predicted_error);
  m.def("a1_constant", &a1_constant, py::arg("n"));
  m.def("a2_constant", &a2_constant, py::arg("n"));
  m.def("a3_constant", &a3_constant, py::arg("n"));
  m.def("x_from_bits", &x_from_bits, py::arg("bits"));
  m.def("bits_from_x", &bits_from_x, py::arg("x"));
  m.def("make_problem",
        [](const std::vector<double>& ev, int q, int budget) { return make_problem(ev, q, budget); },
        py::arg("eigenvalues"), py::arg("q"), py::arg("budget"));
  m.def("make_incremental_problem",
        [](const std::vector<double>& ev, const std::vector<int>& prev, int q_bar, int budget) {
          return make_incremental_problem(ev, prev, q_bar, budget);
        },
        py::arg("eigenvalues"), py::arg("prev_bits"), py::arg("q_bar"), py::arg("budget"));
  m.def("expected_error",
        [](const AllocationProblem& p, const std::vector<double>& x) { return expected_error(p, x); },
        py::arg("problem"), py::arg("x"));
  m.def("expected_error_bits",
        [](const AllocationProblem& p, const std::vector<int>& bits) { return expected_error_bits(p, bits); },
        py::arg("problem"), py::arg("bits"));
  m.def("incremental_cost",
        [](const AllocationProblem& p, const std::vector<double>& x) { return incremental_cost(p, x); },
        py::arg("problem"), py::arg("x"));
  m.def("solve_convex", &solve_convex, py::arg("problem"));
  m.def("solve_first_order", &solve_first_order, py::arg("problem"));
  m.def("round_to_bits",
        [](const AllocationProblem& p, const std::vector<double>& x) { return round_to_bits(p, x); },
        py::arg("problem"), py::arg("x"));
  m.def("optimize_q",
        [](const std::vector<double>& ev, int budget) { return optimize_q(ev, budget); },
        py::arg("eigenvalues"), py::arg("budget"));
  m.def("heuristic_q_bar", &heuristic_q_bar, py::arg("q_prev"), py::arg("round_budget"), py::arg("n"));
  m.def("solve_incremental",
        [](const std::vector<double>& ev, const std::vector<int>& prev, int q_prev, int budget) {
          return solve_incremental(ev, prev, q_prev, budget);
        },
        py::arg("eigenvalues"), py::arg("prev_bits"), py::arg("q_prev"), py::arg("round_budget"));

  // objectives
  py::class_<Dataset>(m, "Dataset")
      .def(py::init<>())
      .def_readwrite("features", &Dataset::features)
      .def_readwrite("labels", &Dataset::labels)
      .def_property_readonly("size", &Dataset::size)
      .def_property_readonly("dim", &Dataset::dim);
  m.def("load_csv", &load_csv, py::arg("path"));
  m.def("pool", &pool, py::arg("parts"));
  py::class_<Objective>(m, "Objective")
      .def(py::init([](const std::string& kind, Dataset data, double l2) {
             return Objective(objective_from_string(kind), std::move(data), l2);
           }),
           py::arg("kind"), py::arg("data"), py::arg("l2"))
      .def_property_readonly("dim", &Objective::dim)
      .def_property_readonly("samples", &Objective::samples)
      .def_property_readonly("kind", [](const Objective& o) { return to_string(o.kind()); })
      .def_property_readonly("l2", &Objective::l2)
      .def("value", [](const Objective& o, const std::vector<double>& t) { return o.value(t); },
           py::arg("theta"))
      .def("gradient", [](const Objective& o, const std::vector<double>& t) { return o.gradient(t); },
           py::arg("theta"))
      .def("hessian",
           [](const Objective& o, const std::vector<double>& t) { return rows_from_matrix(o.hessian(t)); },
           py::arg("theta"));
  py::class_<SyntheticSpec>(m, "SyntheticSpec")
      .def(py::init<>())
      .def_readwrite("devices", &SyntheticSpec::devices)
      .def_readwrite("samples_per_device", &SyntheticSpec::samples_per_device)
      .def_readwrite("dim", &SyntheticSpec::dim)
      .def_property("kind",
                    [](const SyntheticSpec& s) { return to_string(s.kind); },
                    [](SyntheticSpec& s, const std::string& v) { s.kind = objective_from_string(v); })
      .def_readwrite("condition", &SyntheticSpec::condition)
      .def_readwrite("noise", &SyntheticSpec::noise)
      .def_readwrite("feature_shift", &SyntheticSpec::feature_shift)
      .def_readwrite("label_skew", &SyntheticSpec::label_skew)
      .def_readwrite("seed", &SyntheticSpec::seed);
  m.def("generate_synthetic", &generate_synthetic, py::arg("spec"));

  // protocol
  py::class_<DeviceUpdate>(m, "DeviceUpdate")
      .def(py::init<>())
      .def_readwrite("device", &DeviceUpdate::device)
      .def_readwrite("round", &DeviceUpdate::round)
      .def_readwrite("renewal", &DeviceUpdate::renewal)
      .def_readwrite("gradient_only", &DeviceUpdate::gradient_only)
      .def_readwrite("n", &DeviceUpdate::n)
      .def_readwrite("q_prev", &DeviceUpdate::q_prev)
      .def_readwrite("q_t", &DeviceUpdate::q_t)
      .def_readwrite("rho", &DeviceUpdate::rho)
      .def_readwrite("master_seed", &DeviceUpdate::master_seed)
      .def_readwrite("gradient", &DeviceUpdate::gradient)
      .def_readwrite("eigenvalues", &DeviceUpdate::eigenvalues)
      .def_readwrite("refinements", &DeviceUpdate::refinements);
  py::class_<Broadcast>(m, "Broadcast")
      .def(py::init<>())
      .def_readwrite("round", &Broadcast::round)
      .def_readwrite("n", &Broadcast::n)
      .def_readwrite("eta", &Broadcast::eta)
      .def_readwrite("terminate", &Broadcast::terminate)
      .def_readwrite("theta", &Broadcast::theta);
  m.def("encode_update", [](const DeviceUpdate& u) { return to_bytes(encode_update(u)); },
        py::arg("update"));
  m.def("decode_update", [](const py::bytes& b) { return decode_update(from_bytes(b)); },
        py::arg("data"));
  m.def("encode_broadcast", [](const Broadcast& b) { return to_bytes(encode_broadcast(b)); },
        py::arg("broadcast"));
  m.def("decode_broadcast", [](const py::bytes& b) { return decode_broadcast(from_bytes(b)); },
        py::arg("data"));
  m.def("payload_bits", &payload_bits, py::arg("update"));

  // simulation
  py::class_<RunConfig>(m, "RunConfig")
      .def(py::init<>())
      .def_property("mode",
                    [](const RunConfig& c) { return to_string(c.mode); },
                    [](RunConfig& c, const std::string& v) { c.mode = mode_from_string(v); })
      .def_property("channel",
                    [](const RunConfig& c) { return to_string(c.channel); },
                    [](RunConfig& c, const std::string& v) { c.channel = channel_from_string(v); })
      .def_property("objective",
                    [](const RunConfig& c) { return to_string(c.objective); },
                    [](RunConfig& c, const std::string& v) { c.objective = objective_from_string(v); })
      .def_readwrite("devices", &RunConfig::devices)
      .def_readwrite("dim", &RunConfig::dim)
      .def_readwrite("samples_per_device", &RunConfig::samples_per_device)
      .def_readwrite("max_rounds", &RunConfig::max_rounds)
      .def_readwrite("renewal_period", &RunConfig::renewal_period)
      .def_readwrite("budget_mean", &RunConfig::budget_mean)
      .def_readwrite("tolerance", &RunConfig::tolerance)
      .def_readwrite("l2", &RunConfig::l2)
      .def_readwrite("condition", &RunConfig::condition)
      .def_readwrite("noise", &RunConfig::noise)
      .def_readwrite("feature_shift", &RunConfig::feature_shift)
      .def_readwrite("label_skew", &RunConfig::label_skew)
      .def_readwrite("jitter", &RunConfig::jitter)
      .def_readwrite("seed", &RunConfig::seed)
      .def_readwrite("threads", &RunConfig::threads)
      .def_readwrite("csv_paths", &RunConfig::csv_paths);
  py::class_<RoundMetrics>(m, "RoundMetrics")
      .def_readonly("round", &RoundMetrics::round)
      .def_readonly("loss", &RoundMetrics::loss)
      .def_readonly("grad_norm", &RoundMetrics::grad_norm)
      .def_readonly("eta", &RoundMetrics::eta)
      .def_readonly("q_mean", &RoundMetrics::q_mean)
      .def_readonly("bits_round", &RoundMetrics::bits_round)
      .def_readonly("bits_cum", &RoundMetrics::bits_cum)
      .def_readonly("bytes_raw", &RoundMetrics::bytes_raw)
      .def_readonly("e_spec", &RoundMetrics::e_spec)
      .def_readonly("e_frob", &RoundMetrics::e_frob)
      .def_readonly("kappa", &RoundMetrics::kappa);
  py::class_<RunResult>(m, "RunResult")
      .def_readonly("converged", &RunResult::converged)
      .def_readonly("rounds", &RunResult::rounds)
      .def_readonly("theta", &RunResult::theta)
      .def_readonly("metrics", &RunResult::metrics);
  m.def("run", &run, py::arg("config"), py::call_guard<py::gil_scoped_release>(),
        "Runs the federated Newton simulation to convergence or the round cap.");
  m.def("write_metrics_csv", &write_metrics_csv, py::arg("path"), py::arg("metrics"));
  m.def("channel_budget",
        [](const std::string& channel, double mean, std::uint64_t seed, int round, int device) {
          return channel_budget(channel_from_string(channel), mean, seed, round, device);
        },
        py::arg("channel"), py::arg("mean"), py::arg("seed"), py::arg("round"), py::arg("device"));
  m.def("newton_direction",
        [](const std::vector<std::vector<double>>& h, const std::vector<double>& g, double jitter) {
          return newton_direction(matrix_from_rows(h), g, jitter);
        },
        py::arg("hessian"), py::arg("grad"), py::arg("jitter") = 1e-10);
  m.def("quantization_spectral_norm",
        [](const std::vector<double>& v, const std::vector<double>& vhat) {
          return quantization_spectral_norm(v, vhat);
        },
        py::arg("v"), py::arg("vhat"));
  m.def("quantization_frobenius_norm",
        [](const std::vector<double>& v, const std::vector<double>& vhat) {
          return quantization_frobenius_norm(v, vhat);
        },
        py::arg("v"), py::arg("vhat"));
  m.def("convergence_bound", &convergence_bound, py::arg("lambda_min"), py::arg("quant_error"),
        py::arg("rho_bar"));

  // verification
  py::class_<CheckResult>(m, "CheckResult")
      .def_readonly("name", &CheckResult::name)
      .def_readonly("passed", &CheckResult::pass)
      .def_readonly("detail", &CheckResult::detail);
  m.def("verify_suite_names", &verify_suite_names);
  m.def("run_verify_suite", &run_verify_suite, py::arg("suite"), py::arg("force_failure") = false,
        py::call_guard<py::gil_scoped_release>());

  // independent oracles
  auto orc = m.def_submodule("oracle", "Independent verification routes.");
  py::class_<oracle::McResult>(orc, "McResult")
      .def_readonly("mean", &oracle::McResult::mean)
      .def_readonly("std_error", &oracle::McResult::std_error)
      .def_readonly("draws", &oracle::McResult::draws);
  py::class_<oracle::GridResult>(orc, "GridResult")
      .def_readonly("x", &oracle::GridResult::x)
      .def_readonly("cost", &oracle::GridResult::cost);
  py::class_<oracle::IntegerResult>(orc, "IntegerResult")
      .def_readonly("bits", &oracle::IntegerResult::bits)
      .def_readonly("cost", &oracle::IntegerResult::cost);
  orc.def("mc_frobenius_error",
          [](const std::vector<double>& ev, const std::vector<std::vector<double>>& vecs, int q,
             const std::vector<int>& bits, int draws, std::uint64_t seed) {
            return oracle::mc_frobenius_error(ev, vecs, q, bits, draws, seed);
          },
          py::arg("eigenvalues"), py::arg("eigenvectors"), py::arg("q"), py::arg("bits"),
          py::arg("draws"), py::arg("seed"), py::call_guard<py::gil_scoped_release>());
  orc.def("reference_error_x",
          [](const std::vector<double>& ev, int q, const std::vector<double>& x) {
            return oracle::reference_error_x(ev, q, x);
          },
          py::arg("eigenvalues"), py::arg("q"), py::arg("x"));
  orc.def("reference_error",
          [](const std::vector<double>& ev, int q, const std::vector<int>& bits) {
            return oracle::reference_error(ev, q, bits);
          },
          py::arg("eigenvalues"), py::arg("q"), py::arg("bits"));
  orc.def("grid_search_alloc",
          [](const std::vector<double>& ev, int q, int budget, int points, int zooms) {
            return oracle::grid_search_alloc(ev, q, budget, points, zooms);
          },
          py::arg("eigenvalues"), py::arg("q"), py::arg("budget"), py::arg("points_per_dim") = 21,
          py::arg("zoom_rounds") = 6, py::call_guard<py::gil_scoped_release>());
  orc.def("exhaustive_integer_alloc",
          [](const std::vector<double>& ev, int q, int budget) {
            return oracle::exhaustive_integer_alloc(ev, q, budget);
          },
          py::arg("eigenvalues"), py::arg("q"), py::arg("budget"),
          py::call_guard<py::gil_scoped_release>());
}
