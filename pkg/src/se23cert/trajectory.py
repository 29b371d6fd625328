"""Smooth reference trajectories and the flat-output-to-state map.

Waypoint trajectories are degree-7 polynomials per segment and per axis
(three positions plus yaw), stitched with continuity through the fourth
derivative and rest endpoints, minimizing the integrated squared snap. The
flatness map turns flat outputs into a reference group state, the body
inputs that realize it, and the body angular acceleration, all in closed
form; thrust direction follows the specific-force vector, so the map is
undefined through free fall.
"""

from dataclasses import dataclass

import numpy as np

from .dynamics import GRAVITY, body_input
from .se23 import group_from_parts

_POLY_ORDER = 7
_N_COEFF = _POLY_ORDER + 1
_MIN_THRUST = 1e-6


@dataclass(frozen=True)
class PolyTrajectory:
    """Piecewise polynomial flat outputs: coeffs[m, i, axis] on normalized time."""

    coeffs: np.ndarray     # (M, 8, 4)
    durations: np.ndarray  # (M,)

    def __post_init__(self):
        object.__setattr__(self, "coeffs", np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "durations", np.asarray(self.durations, dtype=float))
        if self.coeffs.ndim != 3 or self.coeffs.shape[1] != _N_COEFF or self.coeffs.shape[2] != 4:
            raise ValueError("coefficient array must be (segments, 8, 4)")
        if np.any(self.durations <= 0):
            raise ValueError("segment durations must be positive")

    @property
    def total_duration(self):
        return float(self.durations.sum())

    def evaluate(self, t, order=0):
        """Flat-output derivative of the given order, shape (..., 4)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        starts = np.concatenate([[0.0], np.cumsum(self.durations)])
        seg = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.durations) - 1)
        tau = (t - starts[seg]) / self.durations[seg]
        out = np.zeros(t.shape + (4,))
        # d^k/dtau^k of tau^i is i!/(i-k)! tau^(i-k)
        for i in range(order, _N_COEFF):
            fac = 1.0
            for r in range(order):
                fac *= i - r
            out += fac * (tau ** (i - order))[..., None] * self.coeffs[seg, i, :]
        return out / (self.durations[seg] ** order)[..., None]


def _derivative_row(order, tau):
    row = np.zeros(_N_COEFF)
    for i in range(order, _N_COEFF):
        fac = 1.0
        for r in range(order):
            fac *= i - r
        row[i] = fac * tau ** (i - order)
    return row


def _snap_cost_matrix(duration):
    H = np.zeros((_N_COEFF, _N_COEFF))
    for i in range(4, _N_COEFF):
        fi = i * (i - 1) * (i - 2) * (i - 3)
        for j in range(4, _N_COEFF):
            fj = j * (j - 1) * (j - 2) * (j - 3)
            H[i, j] = fi * fj / (i + j - 7)
    return H / duration**7


def min_snap(waypoints, durations):
    """Minimum-snap interpolation of waypoints, at rest at both ends.

    waypoints is (M+1, 3) or (M+1, 4); a missing yaw column is zero. Each of
    the four axes solves its own equality-constrained quadratic program via a
    dense KKT system.
    """
    waypoints = np.asarray(waypoints, dtype=float)
    durations = np.asarray(durations, dtype=float)
    if waypoints.ndim != 2 or waypoints.shape[1] not in (3, 4):
        raise ValueError("waypoints must be (M+1, 3) or (M+1, 4)")
    if waypoints.shape[1] == 3:
        waypoints = np.hstack([waypoints, np.zeros((waypoints.shape[0], 1))])
    M = len(durations)
    if waypoints.shape[0] != M + 1:
        raise ValueError("need one more waypoint than segment durations")
    if np.any(durations <= 0):
        raise ValueError("segment durations must be positive")

    n = M * _N_COEFF
    H = np.zeros((n, n))
    for m in range(M):
        s = m * _N_COEFF
        H[s : s + _N_COEFF, s : s + _N_COEFF] = _snap_cost_matrix(durations[m])

    rows = []
    rhs_cols = []
    def add(row, vals):
        rows.append(row)
        rhs_cols.append(vals)

    zero4 = np.zeros(4)
    for m in range(M):
        s = m * _N_COEFF
        row = np.zeros(n)
        row[s : s + _N_COEFF] = _derivative_row(0, 0.0)
        add(row, waypoints[m])
        row = np.zeros(n)
        row[s : s + _N_COEFF] = _derivative_row(0, 1.0)
        add(row, waypoints[m + 1])
    for m in range(M - 1):
        s0 = m * _N_COEFF
        s1 = (m + 1) * _N_COEFF
        for k in range(1, 5):
            row = np.zeros(n)
            row[s0 : s0 + _N_COEFF] = _derivative_row(k, 1.0) / durations[m] ** k
            row[s1 : s1 + _N_COEFF] = -_derivative_row(k, 0.0) / durations[m + 1] ** k
            add(row, zero4)
    for k in range(1, 4):
        row = np.zeros(n)
        row[0:_N_COEFF] = _derivative_row(k, 0.0) / durations[0] ** k
        add(row, zero4)
        row = np.zeros(n)
        row[n - _N_COEFF : n] = _derivative_row(k, 1.0) / durations[-1] ** k
        add(row, zero4)

    A = np.array(rows)
    b = np.array(rhs_cols)
    n_con = A.shape[0]
    # tiny Tikhonov term keeps the KKT system well posed without moving the optimum
    reg = 1e-9 * max(1.0, np.trace(H) / n)
    kkt = np.block([[H + reg * np.eye(n), A.T], [A, np.zeros((n_con, n_con))]])
    rhs = np.vstack([np.zeros((n, 4)), b])
    sol = np.linalg.solve(kkt, rhs)
    coeffs = sol[:n].reshape(M, _N_COEFF, 4)
    return PolyTrajectory(coeffs=coeffs, durations=durations)


@dataclass(frozen=True)
class ReferenceState:
    """Reference group states with the body inputs realizing them."""

    X: np.ndarray          # (..., 5, 5)
    nu: np.ndarray         # (..., 9) stacked body input
    rate_dot: np.ndarray   # (..., 3) body angular acceleration
    thrust: np.ndarray     # (...,) specific-force magnitude


def flatness_reference(traj, t):
    """Map flat outputs at times t to reference states and inputs.

    Differentiates the thrust-direction construction twice, so the returned
    angular rate and acceleration are exact for the polynomial, not finite
    differences. Raises when the specific force collapses (free fall).
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    pos = traj.evaluate(t, 0)
    vel = traj.evaluate(t, 1)
    acc = traj.evaluate(t, 2)
    jerk = traj.evaluate(t, 3)
    snap = traj.evaluate(t, 4)

    psi, psi_d, psi_dd = pos[..., 3], vel[..., 3], acc[..., 3]
    a, j, s = acc[..., 0:3], jerk[..., 0:3], snap[..., 0:3]

    f = a - GRAVITY  # required specific force, world frame
    T = np.linalg.norm(f, axis=-1)
    if np.any(T < _MIN_THRUST):
        raise ValueError("reference thrust vanishes; attitude undefined through free fall")
    z = f / T[..., None]
    T_d = np.einsum("...i,...i->...", z, j)
    z_d = (j - z * T_d[..., None]) / T[..., None]
    T_dd = np.einsum("...i,...i->...", z_d, j) + np.einsum("...i,...i->...", z, s)
    z_dd = (s - z * T_dd[..., None] - 2.0 * z_d * T_d[..., None]) / T[..., None]

    cp, sp = np.cos(psi), np.sin(psi)
    xc = np.stack([cp, sp, np.zeros_like(cp)], axis=-1)
    xc_d = np.stack([-sp, cp, np.zeros_like(cp)], axis=-1) * psi_d[..., None]
    xc_dd = (
        np.stack([-sp, cp, np.zeros_like(cp)], axis=-1) * psi_dd[..., None]
        - xc * (psi_d**2)[..., None]
    )

    w = np.cross(z, xc)
    nw = np.linalg.norm(w, axis=-1)
    if np.any(nw < 1e-9):
        raise ValueError("thrust axis parallel to the yaw direction; frame undefined")
    y = w / nw[..., None]
    w_d = np.cross(z_d, xc) + np.cross(z, xc_d)
    nw_d = np.einsum("...i,...i->...", y, w_d)
    y_d = (w_d - y * nw_d[..., None]) / nw[..., None]
    w_dd = np.cross(z_dd, xc) + 2.0 * np.cross(z_d, xc_d) + np.cross(z, xc_dd)
    nw_dd = np.einsum("...i,...i->...", y_d, w_d) + np.einsum("...i,...i->...", y, w_dd)
    y_dd = (w_dd - 2.0 * y_d * nw_d[..., None] - y * nw_dd[..., None]) / nw[..., None]

    x = np.cross(y, z)
    x_d = np.cross(y_d, z) + np.cross(y, z_d)
    x_dd = np.cross(y_dd, z) + 2.0 * np.cross(y_d, z_d) + np.cross(y, z_dd)

    R = np.stack([x, y, z], axis=-1)

    w1 = -np.einsum("...i,...i->...", y, z_d)
    w2 = np.einsum("...i,...i->...", x, z_d)
    w3 = np.einsum("...i,...i->...", y, x_d)
    rate = np.stack([w1, w2, w3], axis=-1)

    w1_d = -np.einsum("...i,...i->...", y_d, z_d) - np.einsum("...i,...i->...", y, z_dd)
    w2_d = np.einsum("...i,...i->...", x_d, z_d) + np.einsum("...i,...i->...", x, z_dd)
    w3_d = np.einsum("...i,...i->...", y_d, x_d) + np.einsum("...i,...i->...", y, x_dd)
    rate_dot = np.stack([w1_d, w2_d, w3_d], axis=-1)

    accel_body = np.zeros_like(z)
    accel_body[..., 2] = T

    X = group_from_parts(R, vel[..., 0:3], pos[..., 0:3])
    nu = body_input(accel_body, rate)
    return ReferenceState(X=X, nu=nu, rate_dot=rate_dot, thrust=T)


def reference_envelope(traj, margin=0.05, sample_rate=1000.0):
    """Per-axis bounds on the realized body inputs, with a safety margin.

    Samples the flatness map along the trajectory and returns the maximum
    absolute body specific force and angular rate per axis, inflated by the
    margin. Used as the default certification envelope when no override is
    configured.
    """
    n = max(2, int(np.ceil(traj.total_duration * sample_rate)) + 1)
    ts = np.linspace(0.0, traj.total_duration, n)
    ref = flatness_reference(traj, ts)
    accel = np.abs(ref.nu[..., 3:6]).max(axis=0)
    rate = np.abs(ref.nu[..., 6:9]).max(axis=0)
    return accel * (1.0 + margin), rate * (1.0 + margin)
