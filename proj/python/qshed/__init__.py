"""Distributed Newton optimization with incrementally quantized Hessian
eigenvectors under optimal per-eigenvector bit allocation."""

from ._core import (
    MAX_DEPTH,
    AllocationChoice,
    AllocationProblem,
    Broadcast,
    CheckResult,
    ConsistencyError,
    Dataset,
    DegenerateCoefficient,
    DeviceUpdate,
    EigenDecomposition,
    Error,
    IncrementalPlan,
    Infeasible,
    InvalidInput,
    NumericalFailure,
    Objective,
    ProtocolError,
    QuantizedVector,
    RefinementMessage,
    RoundMetrics,
    RunConfig,
    RunResult,
    SyntheticSpec,
    Unsupported,
    a1_constant,
    a2_constant,
    a3_constant,
    apply_refinement,
    approx_rho,
    assemble_approx,
    bits_from_x,
    channel_budget,
    cholesky_solve,
    convergence_bound,
    decode_broadcast,
    decode_update,
    dequantize,
    eigendecompose,
    encode_broadcast,
    encode_update,
    expected_error,
    expected_error_bits,
    frobenius_error_sq,
    generate_dither,
    generate_synthetic,
    heuristic_q_bar,
    incremental_cost,
    interval_length,
    load_csv,
    make_incremental_problem,
    make_problem,
    make_refinement,
    newton_direction,
    optimize_q,
    oracle,
    payload_bits,
    pool,
    quantization_frobenius_norm,
    quantization_spectral_norm,
    quantize,
    refine,
    round_to_bits,
    run,
    run_verify_suite,
    solve_convex,
    solve_first_order,
    solve_incremental,
    vector_dither_seed,
    verify_suite_names,
    version,
    write_metrics_csv,
    x_from_bits,
)

__version__ = version.split()[-1]

__all__ = [
    "MAX_DEPTH",
    "AllocationChoice",
    "AllocationProblem",
    "Broadcast",
    "CheckResult",
    "ConsistencyError",
    "Dataset",
    "DegenerateCoefficient",
    "DeviceUpdate",
    "EigenDecomposition",
    "Error",
    "IncrementalPlan",
    "Infeasible",
    "InvalidInput",
    "NumericalFailure",
    "Objective",
    "ProtocolError",
    "QuantizedVector",
    "RefinementMessage",
    "RoundMetrics",
    "RunConfig",
    "RunResult",
    "SyntheticSpec",
    "Unsupported",
    "a1_constant",
    "a2_constant",
    "a3_constant",
    "apply_refinement",
    "approx_rho",
    "assemble_approx",
    "bits_from_x",
    "channel_budget",
    "cholesky_solve",
    "convergence_bound",
    "decode_broadcast",
    "decode_update",
    "dequantize",
    "eigendecompose",
    "encode_broadcast",
    "encode_update",
    "expected_error",
    "expected_error_bits",
    "frobenius_error_sq",
    "generate_dither",
    "generate_synthetic",
    "heuristic_q_bar",
    "incremental_cost",
    "interval_length",
    "load_csv",
    "make_incremental_problem",
    "make_problem",
    "make_refinement",
    "newton_direction",
    "optimize_q",
    "oracle",
    "payload_bits",
    "pool",
    "quantization_frobenius_norm",
    "quantization_spectral_norm",
    "quantize",
    "refine",
    "round_to_bits",
    "run",
    "run_verify_suite",
    "solve_convex",
    "solve_first_order",
    "solve_incremental",
    "vector_dither_seed",
    "verify_suite_names",
    "version",
    "write_metrics_csv",
    "x_from_bits",
]
