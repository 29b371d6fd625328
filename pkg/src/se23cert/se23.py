"""Matrix Lie group machinery for extended poses.

State convention used throughout the package:

* group elements are 5x5 matrices ``[[R, v, p], [0, 1, 0], [0, 0, 1]]`` with
  rotation ``R``, velocity in column 3 and position in column 4;
* algebra vectors are ordered ``(pos, vel, rot)`` as a flat 9-vector;
* every operation broadcasts over leading batch dimensions, so ``(B, 9)``
  inputs produce ``(B, ...)`` outputs with no Python-level looping.

The input-transport operator (the exact Jacobian that maps body-input
mismatch into the log-coordinate derivative) is evaluated as a Bernoulli
series with exact rational coefficients; it converges for rotation-log
norms below 2*pi, which is wider than the log map's own domain.
"""

from fractions import Fraction
from math import comb, factorial

import numpy as np

# Couples velocity into position during propagation: the position column of a
# group element integrates the velocity column.
DRIFT = np.zeros((5, 5))
DRIFT[3, 4] = 1.0
DRIFT.setflags(write=False)

# Same coupling lifted to algebra coordinates: position rate picks up the
# velocity slot.
DRIFT_AD = np.zeros((9, 9))
DRIFT_AD[0:3, 3:6] = np.eye(3)
DRIFT_AD.setflags(write=False)

_ROT_CUT = np.pi - 1e-6
_SMALL_ANGLE = 1e-4

_TRANSPORT_MAX_TERMS = 60


def _bernoulli_over_factorial(n_terms):
    """Coefficients c_n = -B_n / n! of -z / (e^z - 1), computed exactly."""
    bern = [Fraction(1)]
    for n in range(1, n_terms):
        s = sum(Fraction(comb(n + 1, k)) * bern[k] for k in range(n))
        bern.append(-s / (n + 1))
    return np.array([-float(b) / factorial(n) for n, b in enumerate(bern)])


_TRANSPORT_COEFF = _bernoulli_over_factorial(_TRANSPORT_MAX_TERMS + 1)
_TRANSPORT_COEFF.setflags(write=False)


def skew(w):
    """Cross-product matrix of a 3-vector, batched."""
    w = np.asarray(w, dtype=float)
    out = np.zeros(w.shape[:-1] + (3, 3))
    out[..., 0, 1] = -w[..., 2]
    out[..., 0, 2] = w[..., 1]
    out[..., 1, 0] = w[..., 2]
    out[..., 1, 2] = -w[..., 0]
    out[..., 2, 0] = -w[..., 1]
    out[..., 2, 1] = w[..., 0]
    return out


def unskew(m):
    m = np.asarray(m, dtype=float)
    return np.stack([m[..., 2, 1], m[..., 0, 2], m[..., 1, 0]], axis=-1)


def rot_exp(w):
    """Rodrigues formula, Taylor-expanded below _SMALL_ANGLE."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w, axis=-1)
    K = skew(w)
    K2 = K @ K
    th2 = th * th
    small = th < _SMALL_ANGLE
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(small, 1.0 - th2 / 6.0, np.sin(th) / np.where(small, 1.0, th))
        b = np.where(small, 0.5 - th2 / 24.0, (1.0 - np.cos(th)) / np.where(small, 1.0, th2))
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a[..., None, None] * K + b[..., None, None] * K2


def rot_log(R):
    """Inverse of rot_exp. Raises beyond the cut locus.

    The rotation angle is recovered from the trace and the axis from the
    skew part, which stays accurate for angles below pi - 1e-6.
    """
    R = np.asarray(R, dtype=float)
    c = np.clip((np.trace(R, axis1=-2, axis2=-1) - 1.0) / 2.0, -1.0, 1.0)
    th = np.arccos(c)
    if np.any(th >= _ROT_CUT):
        raise ValueError("rotation angle at or beyond the log cut locus (pi)")
    axis_raw = unskew(R - np.swapaxes(R, -1, -2)) / 2.0
    small = th < _SMALL_ANGLE
    with np.errstate(divide="ignore", invalid="ignore"):
        # th / sin(th), expanded for small angles
        scale = np.where(small, 1.0 + th * th / 6.0, th / np.where(small, 1.0, np.sin(th)))
    return scale[..., None] * axis_raw


def left_jacobian(w):
    """Left Jacobian of the rotation exponential."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w, axis=-1)
    K = skew(w)
    K2 = K @ K
    th2 = th * th
    small = th < _SMALL_ANGLE
    safe2 = np.where(small, 1.0, th2)
    safe3 = np.where(small, 1.0, th2 * th)
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(small, 0.5 - th2 / 24.0, (1.0 - np.cos(th)) / safe2)
        b = np.where(small, 1.0 / 6.0 - th2 / 120.0, (th - np.sin(th)) / safe3)
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye + a[..., None, None] * K + b[..., None, None] * K2


def left_jacobian_inv(w):
    """Closed-form inverse of left_jacobian."""
    w = np.asarray(w, dtype=float)
    th = np.linalg.norm(w, axis=-1)
    K = skew(w)
    K2 = K @ K
    th2 = th * th
    small = th < _SMALL_ANGLE
    safe2 = np.where(small, 1.0, th2)
    with np.errstate(divide="ignore", invalid="ignore"):
        cot_term = np.where(
            small,
            1.0 / 12.0 + th2 / 720.0,
            1.0 / safe2 - (1.0 + np.cos(th)) / np.where(small, 1.0, 2.0 * th * np.sin(th)),
        )
    eye = np.broadcast_to(np.eye(3), K.shape)
    return eye - 0.5 * K + cot_term[..., None, None] * K2


def hat(xi):
    """Embed a 9-vector into the 5x5 algebra representation."""
    xi = np.asarray(xi, dtype=float)
    out = np.zeros(xi.shape[:-1] + (5, 5))
    out[..., 0:3, 0:3] = skew(xi[..., 6:9])
    out[..., 0:3, 3] = xi[..., 3:6]
    out[..., 0:3, 4] = xi[..., 0:3]
    return out


def vee(m):
    """Inverse of hat."""
    m = np.asarray(m, dtype=float)
    return np.concatenate(
        [m[..., 0:3, 4], m[..., 0:3, 3], unskew(m[..., 0:3, 0:3])], axis=-1
    )


def group_from_parts(R, v, p):
    R = np.asarray(R, dtype=float)
    out = np.zeros(R.shape[:-2] + (5, 5))
    out[..., 0:3, 0:3] = R
    out[..., 0:3, 3] = v
    out[..., 0:3, 4] = p
    out[..., 3, 3] = 1.0
    out[..., 4, 4] = 1.0
    return out


def group_parts(X):
    X = np.asarray(X, dtype=float)
    return X[..., 0:3, 0:3], X[..., 0:3, 3], X[..., 0:3, 4]


def group_exp(xi):
    """Closed-form exponential: Rodrigues rotation, left-Jacobian columns."""
    xi = np.asarray(xi, dtype=float)
    w = xi[..., 6:9]
    R = rot_exp(w)
    J = left_jacobian(w)
    v = (J @ xi[..., 3:6, None])[..., 0]
    p = (J @ xi[..., 0:3, None])[..., 0]
    return group_from_parts(R, v, p)


def group_log(X):
    """Closed-form logarithm, inverse of group_exp on its domain."""
    R, v, p = group_parts(X)
    w = rot_log(R)
    Ji = left_jacobian_inv(w)
    return np.concatenate(
        [(Ji @ p[..., None])[..., 0], (Ji @ v[..., None])[..., 0], w], axis=-1
    )


def group_inverse(X):
    """Inverse without a linear solve: transpose the rotation block."""
    R, v, p = group_parts(X)
    Rt = np.swapaxes(R, -1, -2)
    return group_from_parts(Rt, -(Rt @ v[..., None])[..., 0], -(Rt @ p[..., None])[..., 0])


def ad_matrix(xi):
    """Algebra adjoint: ad(x) y = [hat(x), hat(y)] in vector coordinates."""
    xi = np.asarray(xi, dtype=float)
    W = skew(xi[..., 6:9])
    out = np.zeros(xi.shape[:-1] + (9, 9))
    out[..., 0:3, 0:3] = W
    out[..., 3:6, 3:6] = W
    out[..., 6:9, 6:9] = W
    out[..., 0:3, 6:9] = skew(xi[..., 0:3])
    out[..., 3:6, 6:9] = skew(xi[..., 3:6])
    return out


def adjoint_matrix(X):
    """Group adjoint: Ad(X) y = vee(X hat(y) X^-1)."""
    R, v, p = group_parts(X)
    out = np.zeros(R.shape[:-2] + (9, 9))
    out[..., 0:3, 0:3] = R
    out[..., 3:6, 3:6] = R
    out[..., 6:9, 6:9] = R
    out[..., 0:3, 6:9] = skew(p) @ R
    out[..., 3:6, 6:9] = skew(v) @ R
    return out


def _check_transport_domain(xi):
    th = np.linalg.norm(np.asarray(xi, dtype=float)[..., 6:9], axis=-1)
    if np.any(th >= 2.0 * np.pi):
        raise ValueError("input transport series diverges at rotation norm >= 2*pi")


def input_transport(xi, tol=1e-14):
    """Exact input-map Jacobian of the log coordinates, as a (..., 9, 9) matrix.

    Evaluates -A / (e^A - 1) at A = ad_matrix(xi) by its Bernoulli series.
    At xi = 0 this is -I: a positive body-input mismatch initially drives the
    log coordinates down. Truncation is adaptive on the term norm; odd
    coefficients vanish past the linear term, so two consecutive small terms
    are required before stopping.
    """
    _check_transport_domain(xi)
    A = ad_matrix(xi)
    term = np.broadcast_to(np.eye(9), A.shape).copy()
    out = _TRANSPORT_COEFF[0] * term
    below = 0
    for n in range(1, _TRANSPORT_MAX_TERMS + 1):
        term = term @ A
        c = _TRANSPORT_COEFF[n]
        if c != 0.0:
            out = out + c * term
        size = np.max(np.abs(term)) * max(abs(c), 1e-300)
        below = below + 1 if size < tol else 0
        if n > 4 and below >= 2:
            break
    return out


def input_transport_apply(xi, vec, tol=1e-14):
    """input_transport(xi) @ vec without forming the matrix (vector recursion)."""
    _check_transport_domain(xi)
    A = ad_matrix(xi)
    term = np.asarray(vec, dtype=float)
    out = _TRANSPORT_COEFF[0] * term
    ref = max(np.max(np.abs(term)), 1.0)
    below = 0
    for n in range(1, _TRANSPORT_MAX_TERMS + 1):
        term = (A @ term[..., None])[..., 0]
        c = _TRANSPORT_COEFF[n]
        if c != 0.0:
            out = out + c * term
        size = np.max(np.abs(term)) * max(abs(c), 1e-300)
        below = below + 1 if size < tol * ref else 0
        if n > 4 and below >= 2:
            break
    return out
