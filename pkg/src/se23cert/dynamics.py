"""Vehicle model and exact log-coordinate tracking-error dynamics.

The vehicle and the reference share one mixed-invariant model: the state is a
5x5 group element driven on the right by the body inputs (specific force and
angular rate) and on the left by gravity. The left-invariant error between
them obeys an exactly log-linear equation: the log coordinates evolve with a
constant matrix built from the reference inputs, plus the input mismatch
mapped through the state-dependent input transport. No linearization residue
is dropped anywhere in this module.
"""

from dataclasses import dataclass

import numpy as np

from .se23 import (
    DRIFT,
    DRIFT_AD,
    ad_matrix,
    group_inverse,
    hat,
    input_transport_apply,
    skew,
)

GRAVITY = np.array([0.0, 0.0, -9.81])
GRAVITY.setflags(write=False)


def body_input(accel, rate):
    """Stack specific force and body rate into the 9-slot input layout."""
    accel = np.asarray(accel, dtype=float)
    rate = np.asarray(rate, dtype=float)
    zero = np.zeros(accel.shape)
    return np.concatenate([zero, accel, rate], axis=-1)


def gravity_input(gravity=GRAVITY):
    return np.concatenate([np.zeros(3), np.asarray(gravity, dtype=float), np.zeros(3)])


def group_rhs(X, nu, nu_g=None):
    """Mixed-invariant model: body inputs act on the right, gravity on the left.

    Expanding the blocks recovers the familiar rigid-body translation model:
    R_dot = R skew(rate), v_dot = gravity + R accel, p_dot = v.
    """
    X = np.asarray(X, dtype=float)
    if nu_g is None:
        nu_g = gravity_input()
    right = DRIFT + hat(nu)
    left = hat(nu_g) - DRIFT
    return X @ right + left @ X


def left_error(X_b, X_r):
    """Left-invariant error carrying the vehicle state onto the reference."""
    return group_inverse(X_b) @ np.asarray(X_r, dtype=float)


# Actuated channels: thrust-axis specific force and the three body rates.
def input_matrix_actuated():
    B = np.zeros((9, 4))
    B[5, 0] = 1.0
    B[6:9, 1:4] = np.eye(3)
    return B


# Disturbance channels: specific-force offset and body-rate offset.
def input_matrix_disturbance():
    B = np.zeros((9, 6))
    B[3:6, 0:3] = np.eye(3)
    B[6:9, 3:6] = np.eye(3)
    return B


@dataclass(frozen=True)
class ZetaSystem:
    """Exact log-coordinate error system frozen at constant reference inputs.

    A carries the reference rotation rate on all three block diagonals, the
    velocity-to-position drift (+I) in the top-middle block, and minus the
    reference specific-force cross matrix in the middle-right block.
    """

    nu_bar: np.ndarray
    A: np.ndarray
    B_u: np.ndarray
    B_d: np.ndarray

    def __post_init__(self):
        if self.A.shape != (9, 9) or self.B_u.shape != (9, 4) or self.B_d.shape != (9, 6):
            raise ValueError("zeta system blocks have wrong shapes")
        if np.abs(self.A[0:3, 3:6] - np.eye(3)).max() > 1e-12:
            raise ValueError("drift block of A must be +I")


def zeta_system(nu_bar):
    nu_bar = np.asarray(nu_bar, dtype=float)
    A = -ad_matrix(nu_bar) + DRIFT_AD
    return ZetaSystem(nu_bar=nu_bar, A=A, B_u=input_matrix_actuated(), B_d=input_matrix_disturbance())


def lift_inputs(u, d):
    """Scatter actuated and disturbance channels into a 9-slot mismatch."""
    u = np.asarray(u, dtype=float)
    d = np.asarray(d, dtype=float)
    out = np.zeros(u.shape[:-1] + (9,))
    out[..., 3:6] = d[..., 0:3]
    out[..., 5] += u[..., 0]
    out[..., 6:9] = u[..., 1:4] + d[..., 3:6]
    return out


def zeta_rhs_exact(zeta, nu_bar, u, d):
    """Exact error derivative: linear part plus transported input mismatch.

    Matches the derivative of group_log(left_error(...)) to integrator
    accuracy for arbitrary inputs; the only domain limit is the log map's.
    """
    zeta = np.asarray(zeta, dtype=float)
    A = -ad_matrix(nu_bar) + DRIFT_AD
    linear = (A @ zeta[..., None])[..., 0]
    return linear + input_transport_apply(zeta, lift_inputs(u, d))


def zeta_rhs_closed_loop(zeta, A, B_u, K, d_lifted):
    """Certified closed-loop form: (A + B_u K) zeta plus a lifted disturbance."""
    zeta = np.asarray(zeta, dtype=float)
    Acl = A + B_u @ K
    return (Acl @ zeta[..., None])[..., 0] + np.asarray(d_lifted, dtype=float)


def omega_error(omega_ref, R_rb, omega_b):
    """Rate tracking error, expressed in the reference frame."""
    omega_ref = np.asarray(omega_ref, dtype=float)
    return omega_ref - (np.asarray(R_rb, dtype=float) @ np.asarray(omega_b, dtype=float)[..., None])[..., 0]


def omega_error_rhs(omega_err, omega_bar, K_omega, d_alpha):
    """Closed-loop rate-error model under the inverting moment controller."""
    omega_err = np.asarray(omega_err, dtype=float)
    drift = -np.cross(omega_bar, omega_err)
    feedback = (np.asarray(K_omega, dtype=float) @ omega_err[..., None])[..., 0]
    return drift + feedback + np.asarray(d_alpha, dtype=float)


def rigid_body_rate_rhs(omega_b, inertia, moment):
    """Euler's equation solved for the body angular acceleration."""
    omega_b = np.asarray(omega_b, dtype=float)
    inertia = np.asarray(inertia, dtype=float)
    gyro = np.cross(omega_b, (inertia @ omega_b[..., None])[..., 0])
    rhs = np.asarray(moment, dtype=float) - gyro
    return np.linalg.solve(
        np.broadcast_to(inertia, rhs.shape + (3,)), rhs[..., None]
    )[..., 0]


def rotation_rate_jacobian(omega_bar):
    """Reference-frame rate-error plant matrix before feedback."""
    return -skew(np.asarray(omega_bar, dtype=float))
