import math

import pytest

import qshed


def test_quantize_roundtrip_error_bound():
    v = [0.31, -0.2, 0.05, 0.44, -0.38]
    for bits in range(1, 7):
        qv = qshed.quantize(v, bits, dither_seed=9)
        out = qshed.dequantize(qv)
        delta = qshed.interval_length(bits)
        assert qv.depth == bits
        for a, b in zip(v, out):
            assert abs(a - b) <= 0.5 * delta + 1e-15


def test_refine_is_prefix_consistent():
    v = [0.31, -0.2, 0.05, 0.44, -0.38]
    seed = qshed.vector_dither_seed(123, 0)
    staged = qshed.quantize(v, 2, seed)
    staged, msg = qshed.refine(staged, v, 3, 0)
    direct = qshed.quantize(v, 5, seed)
    assert staged.depth == direct.depth
    assert staged.cells == direct.cells
    assert qshed.dequantize(staged) == qshed.dequantize(direct)
    assert msg.added_bits == 3 and msg.prev_depth == 2

    mirrored = qshed.apply_refinement(qshed.QuantizedVector(), qshed.make_refinement(staged, 0, 0))
    assert mirrored == direct


def test_eigendecompose_reconstructs():
    rows = [[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]]
    eig = qshed.eigendecompose(rows)
    assert eig.values == sorted(eig.values, reverse=True)
    approx = qshed.assemble_approx(eig, 3, eig.vectors)
    for i in range(3):
        for j in range(3):
            assert rows[i][j] == pytest.approx(approx[i][j], abs=1e-10)


def test_allocation_matches_reference_and_budget():
    ev = [5.0, 3.0, 2.0, 1.0, 0.5]
    choice = qshed.optimize_q(ev, budget=6)
    assert sum(choice.bits) == 6
    problem = qshed.make_problem(ev, choice.q, 6)
    assert qshed.expected_error_bits(problem, choice.bits) == pytest.approx(
        qshed.oracle.reference_error(ev, choice.q, choice.bits), rel=1e-12
    )
    x = qshed.solve_convex(problem)
    logs = sum(math.log2(xi) for xi in x)
    assert logs == pytest.approx(2 * (choice.q - 6), abs=1e-8)


def test_protocol_roundtrip():
    upd = qshed.DeviceUpdate()
    upd.device = 2
    upd.round = 7
    upd.n = 3
    upd.gradient_only = True
    upd.gradient = [0.1, -0.2, 0.3]
    blob = qshed.encode_update(upd)
    back = qshed.decode_update(blob)
    assert back.device == 2 and back.round == 7
    assert back.gradient == pytest.approx(upd.gradient)
    assert qshed.encode_update(back) == blob


def test_run_converges_on_small_least_squares():
    cfg = qshed.RunConfig()
    cfg.mode = "qshed"
    cfg.devices = 2
    cfg.dim = 6
    cfg.samples_per_device = 64
    cfg.max_rounds = 60
    cfg.renewal_period = 10
    cfg.budget_mean = 4.0
    cfg.tolerance = 1e-8
    cfg.seed = 5
    res = qshed.run(cfg)
    assert res.converged
    assert len(res.theta) == 6
    assert res.metrics[-1].grad_norm <= 1e-8
    assert res.metrics[0].bits_round > 0


def test_invalid_input_raises():
    with pytest.raises(qshed.InvalidInput):
        qshed.make_problem([1.0, 2.0], q=1, budget=4)  # ascending spectrum
    with pytest.raises(qshed.ProtocolError):
        qshed.decode_update(b"nonsense")


def test_verify_suites_exist():
    names = qshed.verify_suite_names()
    assert len(names) >= 4
    results = qshed.run_verify_suite(names[0], force_failure=False)
    assert results and all(r.passed for r in results)
