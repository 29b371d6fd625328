"""Group algebra checks against independent oracles.

The exponential is checked against a truncated matrix power series, the
adjoint interplay against scipy's expm, and the input-transport series
against the scalar closed form -z / (e^z - 1).
"""

import numpy as np
import pytest
from scipy.linalg import expm

from se23cert.se23 import (
    DRIFT,
    DRIFT_AD,
    _TRANSPORT_COEFF,
    ad_matrix,
    adjoint_matrix,
    group_exp,
    group_from_parts,
    group_inverse,
    group_log,
    hat,
    input_transport,
    input_transport_apply,
    left_jacobian,
    left_jacobian_inv,
    rot_exp,
    rot_log,
    skew,
    unskew,
    vee,
)

N_CASES = 100


def random_algebra(rng, rot_max=3.0):
    xi = rng.uniform(-1.0, 1.0, 9)
    xi[0:3] *= 5.0
    xi[3:6] *= 3.0
    w = rng.standard_normal(3)
    xi[6:9] = w / np.linalg.norm(w) * rng.uniform(0.0, rot_max)
    return xi


def series_exp(M, n_terms=40):
    """Power-series exponential, the oracle for the closed form."""
    out = np.eye(M.shape[0])
    term = np.eye(M.shape[0])
    for n in range(1, n_terms):
        term = term @ M / n
        out = out + term
    return out


def test_skew_unskew_roundtrip():
    rng = np.random.default_rng(1)
    w = rng.standard_normal((N_CASES, 3))
    K = skew(w)
    assert np.allclose(np.swapaxes(K, -1, -2), -K)
    assert np.abs(unskew(K) - w).max() == 0.0
    v = rng.standard_normal((N_CASES, 3))
    cross = (K @ v[..., None])[..., 0]
    assert np.abs(cross - np.cross(w, v)).max() < 1e-12


def test_hat_vee_roundtrip():
    rng = np.random.default_rng(2)
    xi = rng.standard_normal((N_CASES, 9))
    assert np.abs(vee(hat(xi)) - xi).max() == 0.0


def test_group_exp_matches_power_series():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(N_CASES):
        xi = random_algebra(rng)
        worst = max(worst, np.abs(group_exp(xi) - series_exp(hat(xi))).max())
    assert worst < 1e-9


def test_exp_log_roundtrip():
    rng = np.random.default_rng(4)
    worst = 0.0
    for _ in range(N_CASES):
        xi = random_algebra(rng)
        worst = max(worst, np.abs(group_log(group_exp(xi)) - xi).max())
    assert worst < 1e-9


def test_rot_log_rejects_cut_locus():
    w = np.array([np.pi, 0.0, 0.0])
    with pytest.raises(ValueError):
        rot_log(rot_exp(w))


def test_small_angle_branches_are_continuous():
    # straddle the Taylor switch and compare against the generic branch
    for th in (0.99e-4, 1.01e-4, 1e-6, 1e-9):
        w = np.array([th, 0.0, 0.0])
        assert np.abs(rot_log(rot_exp(w)) - w).max() < 1e-14
        J = left_jacobian(w)
        assert np.abs(J @ left_jacobian_inv(w) - np.eye(3)).max() < 1e-12


def test_left_jacobian_inverse_consistency():
    rng = np.random.default_rng(5)
    for _ in range(N_CASES):
        w = rng.standard_normal(3)
        w = w / np.linalg.norm(w) * rng.uniform(0.0, 3.0)
        assert np.abs(left_jacobian(w) @ left_jacobian_inv(w) - np.eye(3)).max() < 1e-11


def test_group_inverse():
    rng = np.random.default_rng(6)
    xi = np.stack([random_algebra(rng) for _ in range(N_CASES)])
    X = group_exp(xi)
    prod = X @ group_inverse(X)
    assert np.abs(prod - np.eye(5)).max() < 1e-12


def test_bracket_matches_ad():
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(N_CASES):
        x = random_algebra(rng)
        y = random_algebra(rng)
        bracket = hat(x) @ hat(y) - hat(y) @ hat(x)
        worst = max(worst, np.abs(vee(bracket) - (ad_matrix(x) @ y)).max())
    assert worst < 1e-12


def test_drift_coupling_identity():
    # [hat(z), DRIFT] embeds the lifted coupling applied to z, with a plus sign
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(N_CASES):
        z = random_algebra(rng)
        lhs = hat(z) @ DRIFT - DRIFT @ hat(z)
        worst = max(worst, np.abs(lhs - hat(DRIFT_AD @ z)).max())
    assert worst < 1e-14


def test_adjoint_of_exp_matches_exp_of_ad():
    rng = np.random.default_rng(9)
    worst = 0.0
    for _ in range(N_CASES):
        xi = random_algebra(rng)
        worst = max(
            worst, np.abs(adjoint_matrix(group_exp(xi)) - expm(ad_matrix(xi))).max()
        )
    assert worst < 1e-9


def test_adjoint_action():
    rng = np.random.default_rng(10)
    for _ in range(20):
        x = random_algebra(rng)
        y = random_algebra(rng)
        X = group_exp(x)
        conj = X @ hat(y) @ group_inverse(X)
        assert np.abs(vee(conj) - adjoint_matrix(X) @ y).max() < 1e-10


def scalar_transport(z):
    """Closed form -z / (e^z - 1), the coefficient oracle."""
    if abs(z) < 1e-12:
        return -1.0
    return -z / np.expm1(z)


def test_transport_coefficients_match_scalar_closed_form():
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(N_CASES):
        z = rng.uniform(-3.1, 3.1)
        series = sum(c * z**n for n, c in enumerate(_TRANSPORT_COEFF))
        worst = max(worst, abs(series - scalar_transport(z)))
    assert worst < 1e-10


def test_transport_functional_identity():
    # f(A) (e^A - I) = -A holds for the full matrix argument
    rng = np.random.default_rng(12)
    worst = 0.0
    for _ in range(N_CASES):
        xi = random_algebra(rng)
        A = ad_matrix(xi)
        U = input_transport(xi)
        worst = max(worst, np.abs(U @ (expm(A) - np.eye(9)) + A).max())
    assert worst < 1e-10


def test_transport_at_zero_is_minus_identity():
    assert np.abs(input_transport(np.zeros(9)) + np.eye(9)).max() < 1e-15


def test_transport_apply_matches_matrix():
    rng = np.random.default_rng(13)
    for _ in range(20):
        xi = random_algebra(rng)
        v = rng.standard_normal(9)
        assert np.abs(
            input_transport_apply(xi, v) - input_transport(xi) @ v
        ).max() < 1e-12


def test_transport_domain_guard():
    xi = np.zeros(9)
    xi[6] = 2.0 * np.pi
    with pytest.raises(ValueError):
        input_transport(xi)


def test_transport_invertible_inside_domain():
    rng = np.random.default_rng(14)
    for _ in range(20):
        xi = random_algebra(rng, rot_max=3.0)
        U = input_transport(xi)
        assert np.linalg.cond(U) < 1e6


def test_batched_shapes_match_loop():
    rng = np.random.default_rng(15)
    xi = np.stack([random_algebra(rng) for _ in range(7)])
    X = group_exp(xi)
    assert X.shape == (7, 5, 5)
    back = group_log(X)
    for i in range(7):
        assert np.abs(group_exp(xi[i]) - X[i]).max() < 1e-15
        assert np.abs(group_log(X[i]) - back[i]).max() < 1e-15
    U = input_transport(xi)
    for i in range(7):
        assert np.abs(input_transport(xi[i]) - U[i]).max() < 1e-11


def test_group_from_parts_roundtrip():
    rng = np.random.default_rng(16)
    R = rot_exp(rng.standard_normal(3))
    v = rng.standard_normal(3)
    p = rng.standard_normal(3)
    X = group_from_parts(R, v, p)
    assert X[3, 3] == 1.0 and X[4, 4] == 1.0
    assert np.abs(X[0:3, 3] - v).max() == 0.0
    assert np.abs(X[0:3, 4] - p).max() == 0.0
