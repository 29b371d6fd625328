"""Closed-loop simulation of the certified cascade on the full vehicle model.

The engine is batched: a Monte Carlo population integrates as one stack of
group states and body rates, sharing the reference trajectory, which is
precomputed at every integrator stage time (in closed form for constant-input
references, through the flatness map for polynomial ones). Integration is
classical RK4 with the controller evaluated at each stage and the rotation
block pulled back onto the group after every step.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .dynamics import (
    body_input,
    gravity_input,
    group_rhs,
    input_matrix_actuated,
    left_error,
    rigid_body_rate_rhs,
    zeta_system,
)
from .se23 import DRIFT, group_exp, group_log, hat, input_transport_apply, skew
from .synthesis import angular_rate_command, dynamic_inversion, moment_command
from .trajectory import flatness_reference

SINE = 0
SQUARE = 1


@dataclass(frozen=True)
class DisturbanceDraw:
    """One waveform per run and channel: amplitude, frequency in Hz, phase."""

    kind: np.ndarray       # (runs, channels), SINE or SQUARE
    amplitude: np.ndarray  # (runs, channels)
    frequency: np.ndarray  # (runs, channels)
    phase: np.ndarray      # (runs, channels)

    @property
    def n_runs(self):
        return self.amplitude.shape[0]

    def evaluate(self, t):
        carrier = np.sin(2.0 * np.pi * self.frequency * t + self.phase)
        wave = np.where(self.kind == SQUARE, np.sign(carrier), carrier)
        return self.amplitude * wave


def sample_disturbances(bounds, n_runs, rng):
    """Draw per-run waveforms with amplitude in (0, bound], frequency log-uniform
    over 0.1 to 10 Hz, uniform phase, and an even sine/square split."""
    bounds = np.atleast_1d(np.asarray(bounds, dtype=float))
    if np.any(bounds < 0):
        raise ValueError("disturbance bounds must be nonnegative")
    shape = (n_runs, bounds.shape[0])
    kind = rng.integers(0, 2, size=shape)
    amplitude = bounds * (1.0 - rng.uniform(0.0, 1.0, size=shape))
    frequency = 10.0 ** rng.uniform(-1.0, 1.0, size=shape)
    phase = rng.uniform(0.0, 2.0 * np.pi, size=shape)
    return DisturbanceDraw(kind=kind, amplitude=amplitude, frequency=frequency, phase=phase)


@dataclass(frozen=True)
class ReferenceTables:
    """Reference group state and inputs at the integrator stage times."""

    time: np.ndarray       # (n+1,)
    X: np.ndarray          # (n+1, 5, 5)
    X_half: np.ndarray     # (n, 5, 5), at midpoints
    nu: np.ndarray         # (n+1, 9)
    nu_half: np.ndarray    # (n, 9)
    rate_dot: np.ndarray   # (n+1, 3)
    rate_dot_half: np.ndarray  # (n, 3)


def constant_input_flow(X, nu, dt, nu_g=None):
    """Exact flow of the group dynamics over dt for constant body input.

    Both generators of the mixed-invariant dynamics are constant, so the flow
    is a left and a right matrix exponential. Serves as the truth reference
    for integrator convergence checks and for constant-input reference tables.
    """
    nu_g = gravity_input() if nu_g is None else np.asarray(nu_g, dtype=float)
    E_left = expm(dt * (hat(nu_g) - DRIFT))
    E_right = expm(dt * (DRIFT + hat(np.asarray(nu, dtype=float))))
    return E_left @ X @ E_right


def step_group(X, nu, dt, nu_g=None):
    """One RK4 step of the group dynamics, rotation block reprojected after."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    X = np.asarray(X, dtype=float)
    nu = np.asarray(nu, dtype=float)
    k1 = group_rhs(X, nu, nu_g)
    k2 = group_rhs(X + 0.5 * dt * k1, nu, nu_g)
    k3 = group_rhs(X + 0.5 * dt * k2, nu, nu_g)
    k4 = group_rhs(X + dt * k3, nu, nu_g)
    out = X + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return _project_rotations(out)


def step_omega(omega_b, moment, inertia, dt):
    """One RK4 step of the rigid-body rate dynamics under constant moment."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    omega_b = np.asarray(omega_b, dtype=float)

    def f(w):
        return rigid_body_rate_rhs(w, inertia, moment)

    k1 = f(omega_b)
    k2 = f(omega_b + 0.5 * dt * k1)
    k3 = f(omega_b + 0.5 * dt * k2)
    k4 = f(omega_b + dt * k3)
    return omega_b + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class ConstantInputReference:
    """Reference flying a constant body input, advanced in closed form.

    The left and right generators of the mixed-invariant dynamics are
    constant, so the flow is a fixed pair of matrix exponentials applied per
    step; accumulating them is exact up to rounding.
    """

    def __init__(self, accel, rate, X0=None):
        self.nu = body_input(np.asarray(accel, dtype=float), np.asarray(rate, dtype=float))
        self.X0 = np.eye(5) if X0 is None else np.asarray(X0, dtype=float)

    def tables(self, duration, dt):
        n = int(round(duration / dt))
        right = DRIFT + hat(self.nu)
        left = hat(gravity_input()) - DRIFT
        E_r, E_rh = expm(dt * right), expm(0.5 * dt * right)
        E_l, E_lh = expm(dt * left), expm(0.5 * dt * left)
        X = np.empty((n + 1, 5, 5))
        X_half = np.empty((n, 5, 5))
        X[0] = self.X0
        for k in range(n):
            X_half[k] = E_lh @ X[k] @ E_rh
            X[k + 1] = E_l @ X[k] @ E_r
        time = np.arange(n + 1) * dt
        nu = np.broadcast_to(self.nu, (n + 1, 9)).copy()
        zeros = np.zeros((n + 1, 3))
        return ReferenceTables(
            time=time, X=X, X_half=X_half, nu=nu, nu_half=nu[:n].copy(),
            rate_dot=zeros, rate_dot_half=zeros[:n].copy(),
        )


class TrajectoryReference:
    """Reference following a polynomial trajectory through the flatness map."""

    def __init__(self, trajectory):
        self.trajectory = trajectory

    def tables(self, duration, dt):
        if duration > self.trajectory.total_duration + 1e-9:
            raise ValueError("duration exceeds the trajectory")
        n = int(round(duration / dt))
        time = np.arange(n + 1) * dt
        full = flatness_reference(self.trajectory, time)
        half = flatness_reference(self.trajectory, time[:n] + 0.5 * dt)
        return ReferenceTables(
            time=time, X=full.X, X_half=half.X, nu=full.nu, nu_half=half.nu,
            rate_dot=full.rate_dot, rate_dot_half=half.rate_dot,
        )


@dataclass
class SimLog:
    """Batched closed-loop history; input traces only when requested.

    Group histories are implicit: the reference regenerates deterministically
    and the vehicle state is X_ref exp(-zeta). If the error leaves the log
    chart or the rotation projection fails mid-run, the log is truncated at
    the last completed step and flagged aborted.
    """

    time: np.ndarray            # (n+1,)
    zeta: np.ndarray            # (runs, n+1, 9)
    omega_error: np.ndarray     # (runs, n+1, 3)
    lyap_zeta: np.ndarray       # (runs, n+1)
    lyap_omega: np.ndarray | None
    control: np.ndarray | None      # (runs, n+1, 4)
    moment: np.ndarray | None       # (runs, n+1, 3)
    dist_accel: np.ndarray | None   # (runs, n+1, 3)
    dist_alpha: np.ndarray | None
    dist_rate: np.ndarray | None
    X_final: np.ndarray         # (runs, 5, 5)
    rate_final: np.ndarray      # (runs, 3)
    aborted: bool = False
    abort_reason: str | None = None


def _project_rotations(X):
    # nearest proper rotation per run, keeps the integrator on the group
    u, _, vt = np.linalg.svd(X[..., 0:3, 0:3])
    det = np.linalg.det(u @ vt)
    u = u.copy()
    u[..., :, 2] *= det[..., None]
    X[..., 0:3, 0:3] = u @ vt
    return X


def run_closed_loop(
    bundle,
    reference,
    duration,
    dt=1e-3,
    n_runs=None,
    initial_zeta=None,
    initial_rate_offset=None,
    dist_accel=None,
    dist_alpha=None,
    dist_rate=None,
    rate_feedforward=True,
    store_inputs=False,
):
    """Integrate the certified cascade against a reference, batched over runs.

    initial_zeta plants a left-error offset: the vehicle starts at
    X_ref exp(-zeta0) so the logged error begins exactly at zeta0. The body
    rate starts matched to the rate command (zero inner error) unless
    initial_rate_offset shifts it. Disturbance draws apply per run; their
    run counts must agree with n_runs.

    rate_feedforward feeds the derivative of the rate command into the inner
    loop, differentiated along the disturbance-free error flow. Without it the
    inner loop lags the moving command and its tracking error grows with the
    outer gain.
    """
    sizes = {d.n_runs for d in (dist_accel, dist_alpha, dist_rate) if d is not None}
    if initial_zeta is not None:
        initial_zeta = np.atleast_2d(np.asarray(initial_zeta, dtype=float))
        sizes.add(initial_zeta.shape[0])
    if n_runs is not None:
        sizes.add(n_runs)
    if len(sizes) > 1:
        raise ValueError(f"inconsistent run counts: {sorted(sizes)}")
    B = sizes.pop() if sizes else 1

    tables = reference.tables(duration, dt)
    n = len(tables.time) - 1
    K_zeta = bundle.K_zeta
    K_omega = bundle.K_omega
    inertia = bundle.params.inertia
    P_zeta = bundle.P_zeta.P
    P_omega = bundle.P_omega.P if bundle.P_omega is not None else None

    B_u = input_matrix_actuated()

    def control(X_b, omega_b, X_r, nu_r, rate_dot_r):
        eta = left_error(X_b, X_r)
        zeta = group_log(eta)
        u = dynamic_inversion(zeta, K_zeta)
        beta = nu_r[6:9] + u[:, 1:4]
        beta_dot = np.broadcast_to(rate_dot_r, beta.shape)
        if rate_feedforward:
            # command derivative along the nominal flow; disturbances are
            # unknown to the controller so their share of zeta_dot is omitted
            A = zeta_system(nu_r).A
            lifted = (B_u @ u[..., None])[..., 0]
            zeta_dot = zeta @ A.T + input_transport_apply(zeta, lifted)
            h = 1e-6
            bumped = dynamic_inversion(zeta + h * zeta_dot, K_zeta)
            bumped -= dynamic_inversion(zeta - h * zeta_dot, K_zeta)
            beta_dot = beta_dot + bumped[:, 1:4] / (2.0 * h)
        R_br = eta[..., 0:3, 0:3]
        R_rb = np.swapaxes(R_br, -1, -2)
        err = (R_rb @ (beta - omega_b)[..., None])[..., 0]
        gyro = np.cross(omega_b, beta - omega_b)
        ff = (R_rb @ (beta_dot + gyro)[..., None])[..., 0]
        rate_dot_cmd = angular_rate_command(ff, err, R_br, K_omega)
        moment = moment_command(inertia, rate_dot_cmd, omega_b)
        accel_cmd = nu_r[3:6] + u[:, 0:1] * np.array([0.0, 0.0, 1.0])
        return zeta, u, err, accel_cmd, moment

    zero3 = np.zeros(3)

    def rhs(t, X_b, omega_b, X_r, nu_r, rate_dot_r):
        zeta, u, err, accel_cmd, moment = control(X_b, omega_b, X_r, nu_r, rate_dot_r)
        d_a = dist_accel.evaluate(t) if dist_accel is not None else zero3
        d_al = dist_alpha.evaluate(t) if dist_alpha is not None else zero3
        d_r = dist_rate.evaluate(t) if dist_rate is not None else zero3
        nu_b = body_input(accel_cmd + d_a, omega_b + d_r)
        X_dot = group_rhs(X_b, nu_b)
        omega_dot = rigid_body_rate_rhs(omega_b, inertia, moment) + d_al
        return X_dot, omega_dot, zeta, u, err, moment, d_a, d_al, d_r

    X_b = np.broadcast_to(tables.X[0], (B, 5, 5)).copy()
    if initial_zeta is not None:
        if np.any(np.linalg.norm(initial_zeta[:, 6:9], axis=-1) >= np.pi):
            raise ValueError("initial error rotation must be inside the log chart")
        X_b = X_b @ group_exp(-initial_zeta)
    zeta0 = group_log(left_error(X_b, tables.X[0]))
    u0 = dynamic_inversion(zeta0, K_zeta)
    omega_b = tables.nu[0, 6:9] + u0[:, 1:4]
    if initial_rate_offset is not None:
        omega_b = omega_b + np.atleast_2d(np.asarray(initial_rate_offset, dtype=float))

    log_zeta = np.empty((B, n + 1, 9))
    log_omega_err = np.empty((B, n + 1, 3))
    lyap_zeta = np.empty((B, n + 1))
    lyap_omega = np.empty((B, n + 1)) if P_omega is not None else None
    control_log = np.empty((B, n + 1, 4)) if store_inputs else None
    moment_log = np.empty((B, n + 1, 3)) if store_inputs else None
    da_log = np.empty((B, n + 1, 3)) if store_inputs else None
    dal_log = np.empty((B, n + 1, 3)) if store_inputs else None
    dr_log = np.empty((B, n + 1, 3)) if store_inputs else None

    def record(i, zeta, err, u, moment, d_a, d_al, d_r):
        log_zeta[:, i] = zeta
        log_omega_err[:, i] = err
        lyap_zeta[:, i] = np.einsum("bi,ij,bj->b", zeta, P_zeta, zeta)
        if lyap_omega is not None:
            lyap_omega[:, i] = np.einsum("bi,ij,bj->b", err, P_omega, err)
        if store_inputs:
            control_log[:, i] = u
            moment_log[:, i] = moment
            da_log[:, i] = np.broadcast_to(d_a, (B, 3))
            dal_log[:, i] = np.broadcast_to(d_al, (B, 3))
            dr_log[:, i] = np.broadcast_to(d_r, (B, 3))

    aborted = False
    abort_reason = None
    recorded = 0
    for i in range(n):
        t = tables.time[i]
        th = t + 0.5 * dt
        try:
            k1X, k1w, zeta, u, err, moment, d_a, d_al, d_r = rhs(
                t, X_b, omega_b, tables.X[i], tables.nu[i], tables.rate_dot[i])
            record(i, zeta, err, u, moment, d_a, d_al, d_r)
            recorded = i + 1
            k2X, k2w = rhs(th, X_b + 0.5 * dt * k1X, omega_b + 0.5 * dt * k1w,
                           tables.X_half[i], tables.nu_half[i], tables.rate_dot_half[i])[:2]
            k3X, k3w = rhs(th, X_b + 0.5 * dt * k2X, omega_b + 0.5 * dt * k2w,
                           tables.X_half[i], tables.nu_half[i], tables.rate_dot_half[i])[:2]
            k4X, k4w = rhs(t + dt, X_b + dt * k3X, omega_b + dt * k3w,
                           tables.X[i + 1], tables.nu[i + 1], tables.rate_dot[i + 1])[:2]
        except ValueError as exc:
            aborted = True
            abort_reason = str(exc)
            break
        X_b = X_b + dt / 6.0 * (k1X + 2.0 * k2X + 2.0 * k3X + k4X)
        omega_b = omega_b + dt / 6.0 * (k1w + 2.0 * k2w + 2.0 * k3w + k4w)
        X_b = _project_rotations(X_b)

    if not aborted:
        t_end = tables.time[n]
        try:
            _, _, zeta, u, err, moment, d_a, d_al, d_r = rhs(
                t_end, X_b, omega_b, tables.X[n], tables.nu[n], tables.rate_dot[n])
            record(n, zeta, err, u, moment, d_a, d_al, d_r)
            recorded = n + 1
        except ValueError as exc:
            aborted = True
            abort_reason = str(exc)

    def cut(arr):
        return arr if arr is None or not aborted else arr[:, :recorded]

    return SimLog(
        time=tables.time if not aborted else tables.time[:recorded],
        zeta=cut(log_zeta),
        omega_error=cut(log_omega_err),
        lyap_zeta=cut(lyap_zeta),
        lyap_omega=cut(lyap_omega),
        control=cut(control_log),
        moment=cut(moment_log),
        dist_accel=cut(da_log),
        dist_alpha=cut(dal_log),
        dist_rate=cut(dr_log),
        X_final=X_b,
        rate_final=omega_b,
        aborted=aborted,
        abort_reason=abort_reason,
    )


@dataclass(frozen=True)
class MonteCarloResult:
    log: SimLog
    draws: dict
    seed: int


def monte_carlo(bundle, reference, duration, n_runs, seed, dt=1e-3,
                rate_feedforward=True, store_inputs=False):
    """Run a batch of disturbance realizations against one certificate.

    Seeding is hierarchical: one sequence per disturbance group, spawned from
    the given seed, so results are bit-for-bit reproducible.
    """
    seq = np.random.SeedSequence(seed)
    accel_seq, alpha_seq, rate_seq = seq.spawn(3)
    draws = {}
    dist_accel = dist_alpha = dist_rate = None
    if bundle.d_accel > 0.0:
        dist_accel = sample_disturbances(
            bundle.d_accel * np.ones(3), n_runs, np.random.default_rng(accel_seq))
        draws["accel"] = dist_accel
    if bundle.d_alpha > 0.0:
        dist_alpha = sample_disturbances(
            bundle.d_alpha * np.ones(3), n_runs, np.random.default_rng(alpha_seq))
        draws["alpha"] = dist_alpha
    if bundle.d_rate_direct > 0.0:
        dist_rate = sample_disturbances(
            bundle.d_rate_direct * np.ones(3), n_runs, np.random.default_rng(rate_seq))
        draws["rate"] = dist_rate
    log = run_closed_loop(
        bundle, reference, duration, dt=dt, n_runs=n_runs,
        dist_accel=dist_accel, dist_alpha=dist_alpha, dist_rate=dist_rate,
        rate_feedforward=rate_feedforward, store_inputs=store_inputs,
    )
    return MonteCarloResult(log=log, draws=draws, seed=seed)


@dataclass(frozen=True)
class ContainmentReport:
    """Worst Lyapunov level across a batch, against the unit sublevel set."""

    max_level: float
    run_index: int
    time_of_max: float
    violation_count: int
    first_violation_time: float | None
    margin: float
    per_run_max: np.ndarray
    axis_max: np.ndarray | None

    @property
    def contained(self):
        return self.violation_count == 0


def containment_report(time, levels, threshold=1.0, tol=1e-6, errors=None):
    """Check a batch of Lyapunov histories against threshold + tol.

    errors, when given as a (runs, steps, dim) stack, adds per-axis maxima of
    the absolute error to the report.
    """
    levels = np.asarray(levels, dtype=float)
    flat = np.argmax(levels)
    run, idx = np.unravel_index(flat, levels.shape)
    max_level = float(levels[run, idx])
    violating = levels > threshold + tol
    count = int(np.count_nonzero(np.any(violating, axis=1)))
    first = None
    if count:
        first = float(time[np.argmax(np.any(violating, axis=0))])
    axis_max = None
    if errors is not None:
        axis_max = np.abs(np.asarray(errors, dtype=float)).max(axis=(0, 1))
    return ContainmentReport(
        max_level=max_level,
        run_index=int(run),
        time_of_max=float(time[idx]),
        violation_count=count,
        first_violation_time=first,
        margin=float(threshold - max_level),
        per_run_max=levels.max(axis=1),
        axis_max=axis_max,
    )


@dataclass(frozen=True)
class RateLoopResult:
    time: np.ndarray
    error: np.ndarray   # (runs, n+1, 3)
    lyap: np.ndarray    # (runs, n+1)
    draw: DisturbanceDraw


def rate_loop_monte_carlo(rate, K_omega, ellipsoid, d_alpha, duration, n_runs, seed, dt=1e-3):
    """Monte Carlo on the rate-error model alone: e' = -rate x e + K e + d.

    Starts from zero error, which is inside every invariant set, so the
    certified sublevel set must contain the whole batch.
    """
    draw = sample_disturbances(
        d_alpha * np.ones(3), n_runs, np.random.default_rng(np.random.SeedSequence(seed)))
    A_cl = -skew(np.asarray(rate, dtype=float)) + np.asarray(K_omega, dtype=float)
    n = int(round(duration / dt))
    time = np.arange(n + 1) * dt
    err = np.zeros((n_runs, 3))
    hist = np.empty((n_runs, n + 1, 3))
    hist[:, 0] = err

    def f(t, e):
        return e @ A_cl.T + draw.evaluate(t)

    for i in range(n):
        t = time[i]
        k1 = f(t, err)
        k2 = f(t + 0.5 * dt, err + 0.5 * dt * k1)
        k3 = f(t + 0.5 * dt, err + 0.5 * dt * k2)
        k4 = f(t + dt, err + dt * k3)
        err = err + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        hist[:, i + 1] = err
    lyap = np.einsum("bni,ij,bnj->bn", hist, ellipsoid.P, hist)
    return RateLoopResult(time=time, error=hist, lyap=lyap, draw=draw)
