"""Acceptance gate: one test per top-level claim, one PASS/FAIL line each.

Run with `pytest tests/test_acceptance.py -v -s` to see the measured margins.
Each test prints its measurement before asserting, so a red run still shows
how far off it was.
"""

import json
import time

import numpy as np
import pytest
from scipy.linalg import expm

from se23cert.cli import main as cli_main
from se23cert.dynamics import (
    body_input,
    group_rhs,
    input_matrix_actuated,
    input_matrix_disturbance,
    left_error,
    zeta_rhs_exact,
    zeta_system,
)
from se23cert.se23 import (
    _TRANSPORT_COEFF,
    DRIFT,
    DRIFT_AD,
    ad_matrix,
    adjoint_matrix,
    group_exp,
    group_log,
    hat,
    skew,
    vee,
)
from se23cert.sim import (
    ConstantInputReference,
    monte_carlo,
    rate_loop_monte_carlo,
)
from se23cert.synthesis import (
    VehicleParams,
    certify_cascade,
    certify_omega,
    ellipsoid_nested,
    invariant_ellipsoid,
    s_procedure_residual,
)

ENV_ACCEL = np.array([7.5, 7.5, 0.0])
ENV_RATE = np.array([5.0, 5.0, 1.0])
ROT_WEIGHTED_Q = np.diag([1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1e3, 1e3, 1e3])
RATE_Q = 1e4 * np.eye(3)


def _report(name, ok, detail):
    print(f"\n{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture(scope="module")
def zeta_scenarios():
    """Certify and Monte-Carlo both disturbance levels once, timed end to end."""
    started = time.perf_counter()
    bundles = {}
    results = {}
    for d_accel in (0.1, 1.0):
        bundle = certify_cascade(
            VehicleParams(), ENV_ACCEL, ENV_RATE,
            d_accel=d_accel, d_alpha=0.1,
            Q_omega=RATE_Q, Q_zeta=ROT_WEIGHTED_Q,
        )
        reference = ConstantInputReference(ENV_ACCEL, ENV_RATE)
        result = monte_carlo(
            bundle, reference, duration=10.0, n_runs=100, seed=11,
            dt=1e-3, rate_feedforward=False,
        )
        bundles[d_accel] = bundle
        results[d_accel] = result
    elapsed = time.perf_counter() - started
    return bundles, results, elapsed


@pytest.fixture(scope="module")
def omega_certificate():
    return certify_omega(ENV_RATE, d_alpha=0.1)


def _smooth_batch(rng, n_flights, n_channels, scale):
    amp = rng.uniform(-1.0, 1.0, (n_flights, 2, n_channels)) * scale
    freq = rng.uniform(0.2, 1.5, (n_flights, 2, n_channels))
    phase = rng.uniform(0.0, 2 * np.pi, (n_flights, 2, n_channels))

    def f(t):
        return (amp * np.sin(2 * np.pi * freq * t + phase)).sum(axis=1)

    return f


def _rk4(f, y, t, dt):
    k1 = f(t, y)
    k2 = f(t + dt / 2, y + dt / 2 * k1)
    k3 = f(t + dt / 2, y + dt / 2 * k2)
    k4 = f(t + dt, y + dt * k3)
    return y + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


def test_exact_log_linear_error_dynamics():
    """Group-level error log and the log-coordinate ODE agree to 1e-6 over 5 s.

    Three independently drawn smooth flights run as one batch through the
    vectorized group and algebra routines; both integration routes share the
    same RK4 stepper and step size.
    """
    dt = 1e-3
    steps = 5000
    n_flights = 3
    rng = np.random.default_rng(101)
    a_ref = _smooth_batch(rng, n_flights, 3, np.array([2.0, 2.0, 3.0]))
    w_ref = _smooth_batch(rng, n_flights, 3, np.array([0.8, 0.8, 0.5]))
    u_sig = _smooth_batch(rng, n_flights, 4, np.array([1.0, 0.2, 0.2, 0.2]))
    d_sig = _smooth_batch(
        rng, n_flights, 6, np.array([0.5, 0.5, 0.5, 0.05, 0.05, 0.05]))

    def nu_ref(t):
        return body_input(np.array([0.0, 0.0, 9.81]) + a_ref(t), w_ref(t))

    B_u = input_matrix_actuated()
    B_d = input_matrix_disturbance()
    zeta0 = rng.uniform(-0.2, 0.2, (n_flights, 9))
    X_r = group_exp(rng.standard_normal((n_flights, 9)) * 0.3)
    X_b = X_r @ group_exp(-zeta0)

    started = time.perf_counter()
    # vehicle and reference share one group integration as a (flights, 2)
    # stack; inputs at the three RK4 time points are evaluated once per step
    pair = np.stack([X_b, X_r], axis=1)
    z = zeta0.copy()
    t = 0.0
    half = dt / 2
    for _ in range(steps):
        stage = []
        for tt in (t, t + half, t + dt):
            base = nu_ref(tt)
            u, d = u_sig(tt), d_sig(tt)
            nu_b = base + u @ B_u.T + d @ B_d.T
            stage.append((np.stack([nu_b, base], axis=1), base, u, d))

        g1 = group_rhs(pair, stage[0][0])
        g2 = group_rhs(pair + half * g1, stage[1][0])
        g3 = group_rhs(pair + half * g2, stage[1][0])
        g4 = group_rhs(pair + dt * g3, stage[2][0])
        pair = pair + dt / 6 * (g1 + 2 * g2 + 2 * g3 + g4)

        k1 = zeta_rhs_exact(z, stage[0][1], stage[0][2], stage[0][3])
        k2 = zeta_rhs_exact(z + half * k1, stage[1][1], stage[1][2], stage[1][3])
        k3 = zeta_rhs_exact(z + half * k2, stage[1][1], stage[1][2], stage[1][3])
        k4 = zeta_rhs_exact(z + dt * k3, stage[2][1], stage[2][2], stage[2][3])
        z = z + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        t += dt
    z_true = group_log(left_error(pair[:, 0], pair[:, 1]))
    worst = float(np.abs(z - z_true).max())
    elapsed = time.perf_counter() - started

    ok = worst < 1e-6 and elapsed < 5.0
    _report(
        "exact log-linear error dynamics", ok,
        f"max deviation {worst:.3e} (tol 1e-6) over 5 s x {n_flights} flights, "
        f"runtime {elapsed:.2f} s (limit 5 s)",
    )
    assert worst < 1e-6
    assert elapsed < 5.0


def test_algebra_identity_suite():
    """Five structural identities, 100 random draws each, at fixed tolerances."""
    rng = np.random.default_rng(77)

    def draw():
        w = rng.standard_normal(3)
        n = np.linalg.norm(w)
        if n > 3.0:
            w *= 3.0 / n
        return np.concatenate([rng.standard_normal(6) * 2.0, w])

    worst_roundtrip = worst_bracket = worst_coupling = 0.0
    worst_adjoint = worst_transport = 0.0
    for _ in range(100):
        x = draw()
        y = draw()
        worst_roundtrip = max(
            worst_roundtrip, np.abs(group_log(group_exp(x)) - x).max())
        bracket = hat(x) @ hat(y) - hat(y) @ hat(x)
        worst_bracket = max(
            worst_bracket, np.abs(vee(bracket) - ad_matrix(x) @ y).max())
        coupling = hat(x) @ DRIFT - DRIFT @ hat(x)
        worst_coupling = max(
            worst_coupling, np.abs(coupling - hat(DRIFT_AD @ x)).max())
        worst_adjoint = max(
            worst_adjoint,
            np.abs(adjoint_matrix(group_exp(x)) - expm(ad_matrix(x))).max())
        z = rng.uniform(-3.1, 3.1)
        series = sum(c * z ** n for n, c in enumerate(_TRANSPORT_COEFF))
        closed = -1.0 if abs(z) < 1e-12 else -z / np.expm1(z)
        worst_transport = max(worst_transport, abs(series - closed))

    checks = (
        ("exp/log roundtrip", worst_roundtrip, 1e-9),
        ("bracket vs ad", worst_bracket, 1e-12),
        ("drift coupling", worst_coupling, 1e-14),
        ("Adjoint of exp vs exp of ad", worst_adjoint, 1e-9),
        ("input transport vs scalar oracle", worst_transport, 1e-10),
    )
    ok = all(worst < tol for _, worst, tol in checks)
    detail = "; ".join(f"{n} {w:.2e} (tol {t:g})" for n, w, t in checks)
    _report("algebra identity suite", ok, detail)
    for name, worst, tol in checks:
        assert worst < tol, name


def test_scalar_invariant_set_oracle():
    """For x' = -x + d with |d| <= 1 the certified set must be [-1, 1]."""
    ell = invariant_ellipsoid(
        np.array([[-1.0]]), np.array([[1.0]]), np.array([1.0]))
    bound = float(ell.axis_bounds()[0])
    err = abs(bound - 1.0)
    ok = err < 1e-6
    _report(
        "scalar invariant-set oracle", ok,
        f"certified extent {bound:.9f}, deviation {err:.3e} (tol 1e-6)",
    )
    assert err < 1e-6


def test_rate_subsystem_certification(omega_certificate):
    """Default-weight rate-loop bound is finite, holds in MC, and is plausible."""
    K_omega, ell, bound = omega_certificate
    finite = bool(np.all(np.isfinite(bound)) and np.all(bound > 0))
    result = rate_loop_monte_carlo(
        ENV_RATE, K_omega, ell, d_alpha=0.1,
        duration=5.0, n_runs=100, seed=3,
    )
    max_level = float(result.lyap.max())
    axis_max = np.abs(result.error).max(axis=(0, 1))
    contained = max_level <= 1.0 + 1e-6 and bool(np.all(axis_max <= bound + 1e-12))
    inf_bound = float(bound.max())
    plausible = 0.03162 / 10.0 <= inf_bound <= 0.03162 * 10.0

    ok = finite and contained and plausible
    _report(
        "rate-loop certification", ok,
        f"bound {np.array2string(bound, precision=4)} rad/s, "
        f"MC max level {max_level:.3e} over 100 runs, "
        f"inf-norm bound {inf_bound:.4f} vs 0.03162 within factor 10",
    )
    assert finite
    assert max_level <= 1.0 + 1e-6
    assert np.all(axis_max <= bound + 1e-12)
    assert plausible


def test_log_error_certification_and_containment(zeta_scenarios):
    """Both disturbance levels certify; 100 nonlinear runs each stay inside."""
    bundles, results, elapsed = zeta_scenarios
    levels = {
        d: float(r.log.lyap_zeta.max()) for d, r in results.items()
    }
    aborted = any(r.log.aborted for r in results.values())
    nested, margin = ellipsoid_nested(
        inner=bundles[0.1].P_zeta, outer=bundles[1.0].P_zeta)
    ok = (
        not aborted
        and all(v <= 1.0 + 1e-6 for v in levels.values())
        and nested
        and elapsed < 120.0
    )
    _report(
        "log-error certification and containment", ok,
        f"max level {levels[0.1]:.4f} (budget 0.1), {levels[1.0]:.4f} "
        f"(budget 1.0) over 100 runs x 10 s each, nesting margin "
        f"{margin:.3f} <= 1, runtime {elapsed:.1f} s (limit 120 s)",
    )
    assert not aborted
    assert levels[0.1] <= 1.0 + 1e-6
    assert levels[1.0] <= 1.0 + 1e-6
    assert nested
    assert elapsed < 120.0


def test_certificate_residuals(zeta_scenarios, omega_certificate):
    """Every ellipsoid returned this run satisfies its matrix inequality."""
    bundles, _, _ = zeta_scenarios
    residuals = {}

    ell = invariant_ellipsoid(
        np.array([[-1.0]]), np.array([[1.0]]), np.array([1.0]))
    residuals["scalar"] = s_procedure_residual(
        ell, np.array([[-1.0]]), np.array([[1.0]]), np.array([1.0]))

    K_omega, ell_omega, _ = omega_certificate
    A_rate = -skew(ENV_RATE) + K_omega
    residuals["rate standalone"] = s_procedure_residual(
        ell_omega, A_rate, np.eye(3), 0.1 * np.ones(3))

    sys = zeta_system(body_input(ENV_ACCEL, ENV_RATE))
    for d_accel, bundle in bundles.items():
        A_cl = -skew(ENV_RATE) + bundle.K_omega
        residuals[f"rate in cascade {d_accel}"] = s_procedure_residual(
            bundle.P_omega, A_cl, np.eye(3), bundle.d_alpha * np.ones(3))
        d_full = np.concatenate([
            d_accel * np.ones(3), bundle.omega_bound + bundle.d_rate_direct,
        ])
        residuals[f"log-error {d_accel}"] = s_procedure_residual(
            bundle.P_zeta, sys.A + sys.B_u @ bundle.K_zeta, sys.B_d, d_full)

    worst = max(residuals.values())
    ok = worst <= 1e-8
    detail = ", ".join(f"{k} {v:.2e}" for k, v in residuals.items())
    _report("certificate residuals", ok, f"max eigenvalues: {detail} (tol 1e-8)")
    for name, value in residuals.items():
        assert value <= 1e-8, name


def test_deterministic_csv_output(tmp_path):
    """Identical seeds through the CLI yield bitwise-identical CSV files."""
    config = {
        "vehicle": {"mass": 1.5, "inertia": [0.02, 0.02, 0.04]},
        "envelope": {"accel": [7.5, 7.5, 0.0], "rate": [5.0, 5.0, 1.0]},
        "weights": {"Q_omega": 1e4, "Q_zeta": [1, 1, 1, 1, 1, 1, 1000, 1000, 1000]},
        "disturbances": {"accel": [0.1, 1.0], "alpha": 0.1},
        "sim": {"dt": 1e-3, "duration": 0.5, "n_runs": 2, "seed": 11,
                "log_stride": 5, "rate_feedforward": False},
        "out_dir": str(tmp_path / "out"),
    }
    cfg_path = tmp_path / "config.json"
    cfg_path.write_text(json.dumps(config))
    assert cli_main(["certify", "--config", str(cfg_path)]) == 0
    bundle = tmp_path / "out" / "bundle_small.json"

    blobs = []
    for rep in ("a", "b"):
        out = tmp_path / rep
        assert cli_main([
            "simulate", "--config", str(cfg_path),
            "--bundle", str(bundle), "--out", str(out),
        ]) == 0
        assert cli_main([
            "export", str(out / "history_small.csv"),
            "--config", str(cfg_path), "--bundle", str(bundle),
            "--out", str(out),
        ]) == 0
        blobs.append(b"".join(
            (out / name).read_bytes()
            for name in ("history_small.csv", "sets_algebra_small.csv",
                         "sets_group_small.csv", "fig_history_small.csv")
        ))
    ok = blobs[0] == blobs[1]
    _report(
        "deterministic output", ok,
        f"two seeded pipeline runs produced {'identical' if ok else 'DIFFERING'} "
        f"bytes across 4 CSV kinds",
    )
    assert ok
