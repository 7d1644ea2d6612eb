"""Invariant suites behind the ``selftest`` subcommand.

Each suite checks the documented invariants of one module at fixed seeds;
the acceptance suite runs the heavier end-to-end properties (descent,
width scaling, variant comparisons).  Checks call into the library through
module attributes so a corrupted kernel is caught here no matter where the
corruption was injected.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from . import harness, linalg, manifold, optim, problems
from .errors import DivergenceError
from .rng import Rng


class CheckFailure(AssertionError):
    pass


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise CheckFailure(msg)


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


def _run_checks(checks) -> list[CheckResult]:
    results = []
    for name, fn in checks:
        try:
            detail = fn()
            results.append(CheckResult(name, True, detail or ""))
        except Exception as exc:  # noqa: BLE001 - every failure is a test failure
            results.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
    return results


def _skew(rng: Rng, n: int) -> np.ndarray:
    a = rng.normal_matrix(n, n)
    return 0.5 * (a - a.T)


def _scaled_skew(rng: Rng, n: int, fro: float) -> np.ndarray:
    s = _skew(rng, n)
    return s * (fro / linalg.frobenius_norm(s))


# ---------------------------------------------------------------------------
# linalg


def _check_cayley_orthogonality():
    for dim, fro, seed in [(2, 0.3, 1), (8, 1.0, 2), (16, 5.0, 3), (64, 10.0, 4)]:
        s = _scaled_skew(Rng(seed), dim, fro)
        q = linalg.exp_cayley(s)
        err = linalg.frobenius_norm(q.T @ q - np.eye(dim))
        _require(err <= 1e-12, f"cayley orthogonality {err:.2e} at dim {dim}")


def _check_taylor_truncation_scaling():
    for order in (1, 2, 3, 4):
        s = _scaled_skew(Rng(40 + order), 8, 0.5)
        ref_full = linalg.exp_taylor(s, 30)
        ref_half = linalg.exp_taylor(0.5 * s, 30)
        e_full = linalg.frobenius_norm(linalg.exp_taylor(s, order) - ref_full)
        e_half = linalg.frobenius_norm(linalg.exp_taylor(0.5 * s, order) - ref_half)
        exponent = math.log2(e_full / e_half)
        _require(
            order + 0.5 <= exponent <= order + 1.5,
            f"truncation exponent {exponent:.3f} for order {order}",
        )
        # Orthogonality error shrinks at least as fast (even orders faster).
        o_full = linalg.frobenius_norm(
            linalg.exp_taylor(s, order).T @ linalg.exp_taylor(s, order) - np.eye(8)
        )
        o_half = linalg.frobenius_norm(
            linalg.exp_taylor(0.5 * s, order).T @ linalg.exp_taylor(0.5 * s, order)
            - np.eye(8)
        )
        _require(
            o_full / o_half >= 0.7 * 2.0 ** (order + 1),
            f"orthogonality shrink {o_full / o_half:.2f} too slow for order {order}",
        )


def _check_e2_matches_taylor2():
    rng = Rng(7)
    for dim in (3, 9):
        a = rng.normal_matrix(dim, dim)
        for s in (0.0, 0.05, -1.3):
            lhs = linalg.exp_e2(a, s)
            rhs = linalg.exp_taylor(s * a, 2) if s != 0.0 else np.eye(dim)
            _require(
                np.abs(lhs - rhs).max() <= 1e-14 * (1 + np.abs(rhs).max()),
                f"exp_e2 differs from order-2 series at scale {s}",
            )


def _check_singular_value_reconstruction():
    for shape, seed in [((6, 6), 11), ((5, 9), 12), ((17, 4), 13)]:
        a = Rng(seed).normal_matrix(*shape)
        sv = linalg.singular_values(a)
        lhs = float(np.sum(sv * sv))
        rhs = linalg.frobenius_norm(a) ** 2
        _require(abs(lhs - rhs) <= 1e-10 * rhs, f"sum sigma^2 off by {abs(lhs - rhs):.2e}")


def _check_solve_roundtrip():
    for dim, seed in [(4, 21), (12, 22), (32, 23)]:
        rng = Rng(seed)
        a = rng.normal_matrix(dim, dim) + 2.0 * np.eye(dim)
        b = rng.normal_matrix(dim, 3)
        x = linalg.solve(a, b)
        resid = linalg.frobenius_norm(a @ x - b)
        _require(resid <= 1e-10 * linalg.frobenius_norm(b), f"solve residual {resid:.2e}")


def _check_spectral_le_frobenius():
    for shape, seed in [((1, 1), 31), ((7, 3), 32), ((16, 16), 33), ((2, 40), 34)]:
        a = Rng(seed).normal_matrix(*shape)
        _require(
            linalg.spectral_norm(a) <= linalg.frobenius_norm(a) + 1e-12,
            "spectral norm exceeded frobenius norm",
        )


def linalg_suite() -> list[CheckResult]:
    return _run_checks(
        [
            ("cayley_orthogonality", _check_cayley_orthogonality),
            ("taylor_truncation_scaling", _check_taylor_truncation_scaling),
            ("e2_matches_order2_series", _check_e2_matches_taylor2),
            ("singular_value_reconstruction", _check_singular_value_reconstruction),
            ("solve_roundtrip", _check_solve_roundtrip),
            ("spectral_le_frobenius", _check_spectral_le_frobenius),
        ]
    )


# ---------------------------------------------------------------------------
# manifold


def _check_lie_gradients_skew():
    rng = Rng(101)
    dims = [1, 2, 3, 5, 8, 13, 21, 34, 55, 64]
    for i in range(1000):
        d_out = dims[i % len(dims)]
        d_in = dims[(i * 7 + 3) % len(dims)]
        w = rng.normal_matrix(d_out, d_in)
        g = rng.normal_matrix(d_out, d_in)
        pair = manifold.lie_gradients(w, g)
        for side in (pair.g_in, pair.g_out):
            bound = 1e-12 * (1.0 + linalg.frobenius_norm(side))
            _require(linalg.skew_error(side) <= bound, "generator lost skewness")


def _check_descent_identities():
    rng = Rng(102)
    for _ in range(100):
        w = rng.normal_matrix(6, 11)
        g = rng.normal_matrix(6, 11)
        pair = manifold.lie_gradients(w, g)
        a, b = manifold.descent_pairing(w, g)
        ain = 0.5 * linalg.frobenius_norm(pair.g_in) ** 2
        aout = 0.5 * linalg.frobenius_norm(pair.g_out) ** 2
        _require(abs(a - ain) <= 1e-10 * max(ain, 1e-30), "in-side pairing identity")
        _require(abs(b - aout) <= 1e-10 * max(aout, 1e-30), "out-side pairing identity")


def _check_rotation_structure():
    s = _skew(Rng(103), 10)
    sv = linalg.singular_values(s)
    for j in range(5):
        _require(
            abs(sv[2 * j] - sv[2 * j + 1]) <= 1e-10 * sv[0],
            "skew singular values failed to pair",
        )
    theta = 0.37
    planar = np.array([[0.0, theta], [-theta, 0.0]])
    rot = linalg.exp_taylor(planar, 12)
    closed = np.array(
        [[math.cos(theta), math.sin(theta)], [-math.sin(theta), math.cos(theta)]]
    )
    _require(np.abs(rot - closed).max() <= 1e-12, "planar rotation mismatch")
    angles = manifold.rotation_angles(planar)
    _require(abs(angles[0] - theta) <= 1e-12, "rotation angle mismatch")


def _check_stationarity_characterization():
    rng = Rng(104)
    w = rng.normal_matrix(7, 7)
    # W^T G and G W^T are symmetric for g = c W, so the measure vanishes up
    # to matmul rounding (BLAS may sum the (i,j) and (j,i) entries in
    # different orders, so exact zero is not guaranteed).
    _require(manifold.stationarity_measure(w, w) <= 1e-24, "g = W case not zero")
    _require(manifold.stationarity_measure(w, 3.5 * w) <= 1e-24, "g = cW case not zero")
    g = rng.normal_matrix(7, 7)
    _require(manifold.stationarity_measure(w, g) > 1e-6, "generic case not positive")


def _check_drift_orthogonal_invariance():
    rng = Rng(105)
    w0 = rng.normal_matrix(6, 9)
    ref = manifold.capture_spectrum(w0)
    q = linalg.exp_cayley(_skew(rng, 6))
    p = linalg.exp_cayley(_skew(rng, 9))
    drift = manifold.spectrum_drift(q @ w0 @ p.T, ref)
    _require(drift <= 1e-12, f"orthogonal equivalence drifted {drift:.2e}")


def _check_bilateral_normalize():
    rng = Rng(106)
    pair = manifold.lie_gradients(rng.normal_matrix(5, 8), rng.normal_matrix(5, 8))
    out = manifold.bilateral_normalize(pair)
    _require(
        abs(linalg.frobenius_norm(out.g_in) - math.sqrt(8)) <= 1e-12, "in-side norm"
    )
    _require(
        abs(linalg.frobenius_norm(out.g_out) - math.sqrt(5)) <= 1e-12, "out-side norm"
    )
    _require(linalg.skew_error(out.g_in) <= 1e-12, "normalization broke skewness")
    degen = manifold.bilateral_normalize(
        manifold.LiePair(g_in=np.zeros((8, 8)), g_out=pair.g_out)
    )
    _require(degen.in_passthrough and not degen.out_passthrough, "pass-through flags")


def manifold_suite() -> list[CheckResult]:
    return _run_checks(
        [
            ("lie_gradients_skew", _check_lie_gradients_skew),
            ("descent_identities", _check_descent_identities),
            ("rotation_structure", _check_rotation_structure),
            ("stationarity_characterization", _check_stationarity_characterization),
            ("drift_orthogonal_invariance", _check_drift_orthogonal_invariance),
            ("bilateral_normalize", _check_bilateral_normalize),
        ]
    )


# ---------------------------------------------------------------------------
# optim


def _variant_configs(exp_scheme: str) -> list[optim.PionConfig]:
    return [
        optim.PionConfig(exp_scheme=exp_scheme),
        optim.PionConfig(exp_scheme=exp_scheme, update_mode="alternating"),
        optim.PionConfig(
            exp_scheme=exp_scheme,
            momentum_scheme="transported_ambient",
            second_moment="ambient",
        ),
        optim.PionConfig(
            exp_scheme=exp_scheme, momentum_scheme="ambient", second_moment="none"
        ),
        optim.PionConfig(
            exp_scheme=exp_scheme,
            momentum_scheme="none",
            second_moment="none",
            rms_enabled=False,
            lr=1e-4,
        ),
    ]


def _check_spectrum_preservation_cayley():
    prob = problems.least_squares(12, 20, 16, seed=201)
    w0 = prob.initial_params[0]
    g = prob.gradients([w0])[0]
    for cfg in _variant_configs("cayley"):
        state = optim.pion_init(12, 20, w0, cfg)
        w1, _ = optim.pion_step(w0.copy(), g, state, cfg)
        drift = manifold.spectrum_drift(w1, state.spectrum_ref)
        _require(drift <= 1e-12, f"cayley drift {drift:.2e} for {cfg.momentum_scheme}")


def _check_spectrum_preservation_e2():
    prob = problems.least_squares(12, 20, 16, seed=202)
    w0 = prob.initial_params[0]
    steps = 50
    cfg = optim.PionConfig(exp_scheme="e2", lr=1e-3)
    state = optim.pion_init(12, 20, w0, cfg)
    w = w0.copy()
    for _ in range(steps):
        g = prob.gradients([w])[0]
        w, report = optim.pion_step(w, g, state, cfg)
        per_step = report.delta_w_fro_over_eta * cfg.lr
        _require(per_step <= 0.05, f"update {per_step:.3f} outside the small regime")
    drift = manifold.spectrum_drift(w, state.spectrum_ref)
    _require(drift <= steps * 1e-6, f"e2 drift {drift:.2e} over {steps} steps")


def _check_skew_persistence():
    prob = problems.least_squares(6, 10, 8, seed=203)
    cfg = optim.PionConfig(lr=5e-3)
    state = optim.pion_init(6, 10, prob.initial_params[0], cfg)
    w = prob.initial_params[0].copy()
    for _ in range(1000):
        g = prob.gradients([w])[0]
        w, _ = optim.pion_step(w, g, state, cfg)
    for buf in (state.m_in, state.m_out):
        bound = 1e-10 * (1.0 + linalg.frobenius_norm(buf))
        _require(linalg.skew_error(buf) <= bound, "lie momentum lost skewness")


def _check_rms_contract():
    prob = problems.least_squares(8, 14, 10, seed=204)
    cfg = optim.PionConfig(lr=1e-3)
    state = optim.pion_init(8, 14, prob.initial_params[0], cfg)
    w = prob.initial_params[0].copy()
    target = cfg.rms_c * math.sqrt(8 * 14)
    for _ in range(25):
        g = prob.gradients([w])[0]
        w, report = optim.pion_step(w, g, state, cfg)
        _require(report.delta_w_fro_over_eta * cfg.lr <= 0.05, "premise violated")
        ratio = report.delta_w_fro_over_eta / target
        _require(0.9 <= ratio <= 1.1, f"rms ratio {ratio:.4f} outside [0.9, 1.1]")


def _check_alternation_parity():
    rng = Rng(205)
    w = rng.normal_matrix(5, 7)
    cfg = optim.PionConfig(update_mode="alternating")
    state = optim.pion_init(5, 7, w, cfg)
    sides = []
    for _ in range(6):
        g = rng.normal_matrix(5, 7)
        w, report = optim.pion_step(w, g, state, cfg)
        sides.append(report.side_taken)
    _require(
        sides == ["in", "out", "in", "out", "in", "out"],
        f"alternation sequence {sides}",
    )


def _check_monotone_descent():
    prob = problems.least_squares(16, 16, 8, seed=11)
    cfg = optim.PionConfig(
        lr=1e-3,
        momentum_scheme="none",
        second_moment="none",
        rms_enabled=False,
        exp_scheme="taylor",
        taylor_order=12,
    )
    w = prob.initial_params[0].copy()
    prev = prob.loss([w])
    for _ in range(200):
        g = prob.gradients([w])[0]
        w, _ = optim.pion_step_raw(w, g, cfg)
        loss = prob.loss([w])
        _require(loss <= prev + 1e-12, f"loss rose from {prev} to {loss}")
        prev = loss


def _check_mup_direction_invariance():
    rng = Rng(206)
    pair = manifold.lie_gradients(rng.normal_matrix(9, 9), rng.normal_matrix(9, 9))
    cfg = optim.PionConfig(
        mup_mode="spectral_normalize", second_moment="none", rms_enabled=False
    )
    conditioned = optim.apply_mup(pair, cfg)
    for raw, out in [(pair.g_in, conditioned.g_in), (pair.g_out, conditioned.g_out)]:
        d_raw = raw / linalg.frobenius_norm(raw)
        d_out = out / linalg.frobenius_norm(out)
        _require(np.abs(d_raw - d_out).max() <= 1e-12, "direction changed")
        _require(
            abs(linalg.spectral_norm(out) - 1.0) <= 1e-6, "spectral norm not unit"
        )


def _check_baselines_converge():
    spec = harness.ProblemSpec(
        name="least_squares", params={"d_out": 8, "d_in": 16, "n_samples": 8}, seed=31
    )
    for kind, lr in [("adamw", 1e-2), ("sgd", 2e-3)]:
        cfg = harness.RunConfig(
            problem=spec,
            optimizer=optim.BaselineConfig(kind=kind, lr=lr),
            steps=5000,
            record_every=1000,
        )
        rec = harness.run(cfg)
        ratio = rec.summary.final_loss / rec.rows[0].loss
        _require(ratio <= 1e-6, f"{kind} reached only {ratio:.2e} of initial loss")


def _check_muon_update_envelope():
    # Quintic orthogonalization leaves singular values in a band around 1;
    # the envelope below was measured from the iteration itself.
    rng = Rng(207)
    q = linalg.exp_cayley(_skew(rng, 6))
    p = linalg.exp_cayley(_skew(rng, 6))
    m = q @ np.diag([5.0, 3.0, 2.0, 1.0, 0.5, 0.2]) @ p.T
    hyper = optim.BaselineConfig(kind="muon", lr=1e-2, beta1=0.0)
    state = optim.baseline_init(6, 6, hyper)
    w = rng.normal_matrix(6, 6)
    w_next = optim.muon_lite_step(w, m, state, hyper)
    sv = linalg.singular_values(w - w_next) / (hyper.lr * 1.0)
    _require(
        np.all(sv >= 0.65) and np.all(sv <= 1.35),
        f"update singular values {np.round(sv, 3)} left the band",
    )


def optim_suite() -> list[CheckResult]:
    return _run_checks(
        [
            ("spectrum_preservation_cayley", _check_spectrum_preservation_cayley),
            ("spectrum_preservation_e2", _check_spectrum_preservation_e2),
            ("skew_persistence", _check_skew_persistence),
            ("rms_contract", _check_rms_contract),
            ("alternation_parity", _check_alternation_parity),
            ("monotone_descent", _check_monotone_descent),
            ("mup_direction_invariance", _check_mup_direction_invariance),
            ("baselines_converge", _check_baselines_converge),
            ("muon_update_envelope", _check_muon_update_envelope),
        ]
    )


# ---------------------------------------------------------------------------
# problems


def _build_all_problems():
    return [
        problems.least_squares(5, 7, 6, seed=301),
        problems.procrustes(6, seed=302),
        problems.mlp([6, 8, 7, 4], 3, 10, seed=303),
    ]


def _check_gradients_match_fd():
    for prob in _build_all_problems():
        rng = Rng(304)
        for _ in range(10):
            params = [
                w + 0.1 * rng.normal_matrix(*w.shape) for w in prob.initial_params
            ]
            analytic = prob.gradients(params)
            numeric = problems.finite_difference_grads(prob, params, 1e-5)
            for ga, gn in zip(analytic, numeric):
                scale = np.abs(ga).max() + 1e-12
                rel = np.abs(ga - gn).max() / scale
                _require(rel <= 1e-5, f"{prob.name} gradient off by {rel:.2e}")


def _check_least_squares_convex():
    prob = problems.least_squares(5, 7, 6, seed=305)
    rng = Rng(306)
    for _ in range(20):
        w1 = rng.normal_matrix(5, 7)
        w2 = rng.normal_matrix(5, 7)
        mid = prob.loss([0.5 * (w1 + w2)])
        chord = 0.5 * (prob.loss([w1]) + prob.loss([w2]))
        _require(mid <= chord + 1e-12, "midpoint convexity violated")


def _check_procrustes_spectrum_reachable():
    prob = problems.procrustes(7, seed=307)
    target = prob.metadata["target"]
    sv_t = linalg.singular_values(target)
    sv_0 = linalg.singular_values(prob.initial_params[0])
    _require(
        np.abs(sv_t - sv_0).max() <= 1e-12 * sv_0[0],
        "optimum left the initial spectrum",
    )


def problems_suite() -> list[CheckResult]:
    return _run_checks(
        [
            ("gradients_match_finite_differences", _check_gradients_match_fd),
            ("least_squares_convexity", _check_least_squares_convex),
            ("procrustes_spectrum_reachable", _check_procrustes_spectrum_reachable),
        ]
    )


# ---------------------------------------------------------------------------
# harness


def _small_run_config(**overrides) -> harness.RunConfig:
    base = dict(
        problem=harness.ProblemSpec(
            name="least_squares",
            params={"d_out": 6, "d_in": 9, "n_samples": 8},
            seed=401,
        ),
        optimizer=optim.PionConfig(lr=1e-3),
        steps=40,
        record_every=10,
    )
    base.update(overrides)
    return harness.RunConfig(**base)


def _csv_text(record: harness.RunRecord) -> str:
    import io
    import os
    import tempfile

    fd, path = tempfile.mkstemp(suffix=".csv")
    os.close(fd)
    try:
        harness.csv_write(record, path)
        with io.open(path, "r") as fh:
            return fh.read()
    finally:
        os.unlink(path)


def _check_determinism():
    cfg = _small_run_config()
    a = _csv_text(harness.run(cfg))
    b = _csv_text(harness.run(cfg))
    _require(a == b, "identical configs produced different CSVs")


def _check_divergence_detection():
    prob = problems.least_squares(6, 9, 8, seed=402)
    calls = {"n": 0}

    def poisoned_loss(params):
        calls["n"] += 1
        if calls["n"] > 12:
            return float("nan")
        return prob.loss(params)

    poisoned = replace(prob, loss=poisoned_loss)
    cfg = _small_run_config(steps=100, record_every=2)
    try:
        harness.run(cfg, _problem=poisoned)
    except DivergenceError as exc:
        _require(exc.record is not None, "divergence lost the partial record")
        _require(len(exc.record.rows) > 1, "partial record lost its rows")
        _require(exc.record.summary.diverged, "summary not marked diverged")
        return
    raise CheckFailure("NaN loss did not raise a divergence error")


def _check_recorded_drift_bounds():
    cfg = _small_run_config(optimizer=optim.PionConfig(lr=1e-3, exp_scheme="cayley"))
    rec = harness.run(cfg)
    _require(
        max(r.spectrum_drift for r in rec.rows) <= 1e-10,
        "cayley run drift exceeded 1e-10",
    )
    cfg = _small_run_config(optimizer=optim.PionConfig(lr=1e-3, exp_scheme="e2"))
    rec = harness.run(cfg)
    for r in rec.rows:
        _require(r.update_fro_over_eta * 1e-3 <= 0.05, "outside the small regime")
    _require(
        max(r.spectrum_drift for r in rec.rows) <= cfg.steps * 1e-6,
        "e2 run drift exceeded steps * 1e-6",
    )


def _check_config_roundtrip():
    cfg = _small_run_config(
        lr_schedule=harness.Schedule(kind="cosine", floor_fraction=0.01), seed=77
    )
    _require(
        harness.config_parse(harness.config_serialize(cfg)) == cfg,
        "config round-trip changed the config",
    )


def harness_suite() -> list[CheckResult]:
    return _run_checks(
        [
            ("determinism", _check_determinism),
            ("divergence_detection", _check_divergence_detection),
            ("recorded_drift_bounds", _check_recorded_drift_bounds),
            ("config_roundtrip", _check_config_roundtrip),
        ]
    )


# ---------------------------------------------------------------------------
# acceptance criteria (the CLI-driven ones live in the test suite)


def criterion_descent_identities() -> str:
    rng = Rng(501)
    worst = 0.0
    shapes = [(2, 3), (4, 16), (7, 7), (16, 5), (16, 16)]
    for i in range(100):
        d_out, d_in = shapes[i % len(shapes)]
        w = rng.normal_matrix(d_out, d_in)
        g = rng.normal_matrix(d_out, d_in)
        pair = manifold.lie_gradients(w, g)
        a, b = manifold.descent_pairing(w, g)
        for got, want in [
            (a, 0.5 * linalg.frobenius_norm(pair.g_in) ** 2),
            (b, 0.5 * linalg.frobenius_norm(pair.g_out) ** 2),
        ]:
            rel = abs(got - want) / max(want, 1e-30)
            worst = max(worst, rel)
            _require(rel <= 1e-10, f"descent identity off by {rel:.2e}")
    return f"worst relative error {worst:.2e}"


def criterion_exp_orders() -> str:
    _check_cayley_orthogonality()
    _check_taylor_truncation_scaling()
    return "cayley <= 1e-12; truncation exponents within [L+0.5, L+1.5]"


def criterion_descent_and_stationarity_decay() -> str:
    prob = problems.least_squares(16, 16, 8, seed=11)
    cfg = optim.PionConfig(
        lr=1e-3,
        momentum_scheme="none",
        second_moment="none",
        rms_enabled=False,
        exp_scheme="taylor",
        taylor_order=12,
    )
    w = prob.initial_params[0].copy()
    losses = [prob.loss([w])]
    stats = []
    for _ in range(500):
        g = prob.gradients([w])[0]
        stats.append(manifold.stationarity_measure(w, g))
        w, _ = optim.pion_step_raw(w, g, cfg)
        losses.append(prob.loss([w]))
        _require(losses[-1] <= losses[-2] + 1e-12, "loss increased")
    ratio = min(stats[:400]) / min(stats[:100])
    _require(ratio <= 0.5, f"stationarity decay ratio {ratio:.3f} > 0.5")
    return f"monotone over 500 steps; min-S ratio {ratio:.3f}"


def criterion_stationarity_characterization() -> str:
    prob = problems.procrustes(8, seed=3)
    target = prob.metadata["target"]
    s_opt = manifold.stationarity_measure(target, prob.gradients([target])[0])
    _require(s_opt <= 1e-10, f"optimum stationarity {s_opt:.2e}")
    rng = Rng(502)
    for _ in range(10):
        w = rng.normal_matrix(8, 8)
        s = manifold.stationarity_measure(w, prob.gradients([w])[0])
        _require(s > 1e-4, f"random point stationarity {s:.2e} too small")
    return f"optimum S = {s_opt:.2e}; random points all above 1e-4"


def criterion_mup_update_condition() -> str:
    ratios = []
    for width in (64, 128, 256, 512):
        prob = problems.least_squares(width, width, 64, seed=101)
        cfg = optim.PionConfig(
            lr=1e-3,
            momentum_scheme="lie",
            second_moment="none",
            mup_mode="spectral_normalize",
            rms_enabled=False,
        )
        state = optim.pion_init(width, width, prob.initial_params[0], cfg)
        w = prob.initial_params[0].copy()
        for _ in range(10):
            w_prev = w
            g = prob.gradients([w])[0]
            w, _ = optim.pion_step_lie(w, g, state, cfg)
        dw = linalg.spectral_norm(w - w_prev, iters=200, tol=1e-12)
        ratios.append(dw / cfg.lr)  # sqrt(d_out/d_in) = 1 for square weights
    spread = max(ratios) / min(ratios)
    _require(spread <= 2.0, f"update ratio spread {spread:.3f} across widths")
    return f"ratios {[round(r, 3) for r in ratios]}, spread {spread:.3f}"


def criterion_alternating_vs_bilateral() -> str:
    finals = {}
    for mode in ("bilateral", "alternating"):
        prob = problems.mlp([32] * 5, 4, 64, seed=7)
        cfg = optim.PionConfig(lr=1e-3, update_mode=mode)
        states = [
            optim.pion_init(s[0], s[1], w0, cfg)
            for s, w0 in zip(prob.shapes, prob.initial_params)
        ]
        params = [w.copy() for w in prob.initial_params]
        for _ in range(5000):
            grads = prob.gradients(params)
            for i in range(len(params)):
                params[i], _ = optim.pion_step(params[i], grads[i], states[i], cfg)
        finals[mode] = prob.loss(params)
    gap = abs(finals["alternating"] - finals["bilateral"]) / finals["bilateral"]
    _require(gap <= 0.05, f"alternating/bilateral gap {gap:.3%}")
    return (
        f"bilateral {finals['bilateral']:.3e}, alternating "
        f"{finals['alternating']:.3e}, gap {gap:.2%}"
    )


def criterion_transport_benefit() -> str:
    def final_loss(scheme: str, seed: int) -> float:
        prob = problems.mlp([24] * 4, 3, 48, seed=seed)
        cfg = optim.PionConfig(
            lr=1e-2, beta1=0.95, momentum_scheme=scheme, second_moment="none"
        )
        states = [
            optim.pion_init(s[0], s[1], w0, cfg)
            for s, w0 in zip(prob.shapes, prob.initial_params)
        ]
        params = [w.copy() for w in prob.initial_params]
        for _ in range(300):
            grads = prob.gradients(params)
            for i in range(len(params)):
                params[i], _ = optim.pion_step(params[i], grads[i], states[i], cfg)
        return prob.loss(params)

    wins = 0
    for seed in (1, 2, 3, 4, 5):
        if final_loss("transported_ambient", seed) <= final_loss("ambient", seed):
            wins += 1
    _require(wins >= 3, f"transported won only {wins}/5 seeds")
    return f"transported momentum won {wins}/5 seeds"


def criterion_flop_formulas() -> str:
    for d_out, d_in in ((4, 4), (8, 2), (1, 7)):
        est = optim.flop_estimate(d_out, d_in, 1024, optim.PionConfig())
        do, di = float(d_out), float(d_in)
        _require(
            est.lie_gradient == 4 * do * di * di + 4 * do * do * di,
            "lie gradient cost",
        )
        _require(est.rms_scaling == 2 * do * do * di + 2 * do * di * di, "rms cost")
        _require(
            est.update_apply
            == 2 * do * do * di + 2 * do * di * di + do**3 + di**3,
            "update apply cost",
        )
    bil = optim.flop_estimate(8, 2, 512, optim.PionConfig())
    alt = optim.flop_estimate(8, 2, 512, optim.PionConfig(update_mode="alternating"))
    ratio = bil.update_side_dominant / alt.update_side_dominant
    _require(ratio == 2.0, f"dominant-term ratio {ratio}")
    return "closed forms exact; bilateral/alternating dominant ratio 2.0"


def criterion_gradient_oracle() -> str:
    _check_gradients_match_fd()
    return "analytic gradients match central differences to 1e-5 at 10 points"


def acceptance_suite() -> list[CheckResult]:
    return _run_checks(
        [
            ("descent_identities", criterion_descent_identities),
            ("exp_approximation_orders", criterion_exp_orders),
            ("descent_and_stationarity_decay", criterion_descent_and_stationarity_decay),
            ("stationarity_characterization", criterion_stationarity_characterization),
            ("mup_update_condition", criterion_mup_update_condition),
            ("alternating_vs_bilateral", criterion_alternating_vs_bilateral),
            ("momentum_transport_benefit", criterion_transport_benefit),
            ("flop_formulas", criterion_flop_formulas),
            ("gradient_oracle", criterion_gradient_oracle),
        ]
    )


SUITES = {
    "linalg": linalg_suite,
    "manifold": manifold_suite,
    "optim": optim_suite,
    "problems": problems_suite,
    "harness": harness_suite,
    "acceptance": acceptance_suite,
}


def run_suites(names: list[str] | None = None) -> dict[str, list[CheckResult]]:
    chosen = names or list(SUITES)
    return {name: SUITES[name]() for name in chosen}
