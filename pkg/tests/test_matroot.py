import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings, strategies as st

from rootiter import linalg
from rootiter.errors import DivergenceError, DomainError
from rootiter.matroot import (IterationConfig, RootResult, apply_h, compute_root,
                              condition_number_kappa_p, frechet_closed_form,
                              frechet_idempotency_defect, h_factor, inverse_newton_scaled_root,
                              kronecker_sum, newton_scaled_root, reference_relative_error,
                              termination_check, termination_threshold)
from rootiter.polyrat import eval_rational
from rootiter.scalar import scalar_step


def test_config_validation():
    with pytest.raises(DomainError):
        IterationConfig(p=1)
    with pytest.raises(DomainError):
        IterationConfig(p=3, m=0, l=0)
    with pytest.raises(DomainError):
        IterationConfig(p=3, delta=0)
    with pytest.raises(DomainError):
        IterationConfig(p=3, mode="newton")
    assert IterationConfig(p=3, m=5).l == 5


def test_identity_is_fixed_point():
    for p in (2, 3, 5):
        res = compute_root(np.eye(4), IterationConfig(p=p))
        assert res.termination == "converged"
        assert res.iters == 1
        assert np.allclose(res.Y_tilde, np.eye(4), atol=1e-14)
        assert np.allclose(res.Z_tilde, np.eye(4), atol=1e-14)


@pytest.mark.parametrize("c", [0.2, 7.0, 1e4])
def test_scalar_matrix(c):
    res = compute_root(c * np.eye(3), IterationConfig(p=3))
    assert linalg.norm(res.Y_tilde - c ** (1 / 3) * np.eye(3)) <= 1e-13 * c ** (1 / 3)
    assert reference_relative_error(res, c ** (1 / 3) * np.eye(3)) <= 1e-13


def test_wide_spectrum_two_iterations():
    eigs = np.geomspace(1e-15, 1, 10)
    A = np.diag(eigs)
    ref = np.diag(eigs ** (1 / 3))
    res = compute_root(A, IterationConfig(p=3, m=8))
    assert res.iters <= 2
    assert reference_relative_error(res, ref) <= 1e-12
    pade = compute_root(A, IterationConfig(p=3, m=8, mode="pade"))
    assert pade.iters >= 4
    assert reference_relative_error(pade, ref) <= 1e-12


def test_hermitian_pd_moderate_spectrum():
    A, X = linalg.build_test_matrix("hermitian_pd", np.geomspace(1e-6, 1, 8), p=2, rng=3)
    res = compute_root(A, IterationConfig(p=2, m=4))
    assert res.termination == "converged"
    assert reference_relative_error(res, X) <= 1e-12
    assert res.residual_inverse_pair <= 1e-12


def test_nonnormal_matrix_matches_scipy():
    rng = np.random.default_rng(11)
    A = np.eye(6) * 3 + 0.5 * rng.standard_normal((6, 6))
    res = compute_root(A, IterationConfig(p=4, m=3))
    X = scipy.linalg.fractional_matrix_power(A, 0.25)
    assert linalg.norm(res.Y_tilde - X) / linalg.norm(X) <= 1e-11


@pytest.mark.parametrize("A", [
    linalg.build_test_matrix("hermitian_pd", np.geomspace(0.2, 1, 5), p=3, rng=1)[0],
    np.diag(np.geomspace(1e-8, 1, 5)),
])
def test_low_order_types_match_newton(A):
    # the uncoupled references are unstable for spread spectra, hence mild or diagonal A
    newton = newton_scaled_root(A, 3)
    inv_newton = inverse_newton_scaled_root(A, 3)
    a = compute_root(A, IterationConfig(p=3, m=1, l=0))
    b = compute_root(A, IterationConfig(p=3, m=0, l=1))
    assert linalg.norm(a.Y_tilde - newton.Y_tilde) <= 1e-12 * linalg.norm(newton.Y_tilde)
    assert linalg.norm(b.Y_tilde - inv_newton.Y_tilde) <= 1e-12 * linalg.norm(newton.Y_tilde)


def test_newton_identity_every_step():
    res = newton_scaled_root(np.eye(3), 3)
    assert np.allclose(res.Y_tilde, np.eye(3))
    assert res.iters <= 2


def test_inverse_newton_scalar_limit():
    res = inverse_newton_scaled_root(np.array([[4.0]]), 2)
    assert abs(res.Z_tilde[0, 0] - 0.5) <= 1e-13


def test_diagonal_matches_scalar_trajectory():
    p, a, m, l = 3, 0.5, 2, 2
    A = np.diag([a**p, 1.0])
    seen = []
    compute_root(A, IterationConfig(p=p, m=m, l=l, tau_override=1.0, alpha0_override=a),
                 callback=lambda s: seen.append((np.diag(s.Y).copy(), np.diag(s.Z).copy(), s.alpha)))
    z = np.array([a**p, 1.0])
    f, alpha = np.ones(2), a
    for Yd, Zd, al in seen[1:]:
        f, alpha = scalar_step(z, f, alpha, m, l, p)
        if al == 1.0 and alpha < 1:
            alpha = 1.0
        # Z_k = 1/f_k and Y_k = z/f_k^{p-1}
        assert np.allclose(1 / Zd, f, rtol=1e-13)
        assert np.allclose(Yd, z / f ** (p - 1), rtol=1e-13)


def test_apply_h_matches_scalar_on_diagonal():
    hf, _ = h_factor(4, 4, 3, 0.05)
    d = np.geomspace(0.05**3, 1, 5)
    H = apply_h(hf, np.diag(d))
    assert np.allclose(np.diag(H), eval_rational(hf.h, d), rtol=1e-12)
    assert np.allclose(H - np.diag(np.diag(H)), 0)


def test_termination_examples():
    cfg = IterationConfig(p=2, m=1, l=1)
    thr = termination_threshold(cfg)
    assert thr == pytest.approx(2 * (1e-15 / (1 * 4.0**-2)) ** (1 / 3))
    assert termination_check(np.eye(3), cfg)
    assert not termination_check(np.eye(3) + 2 * thr * np.diag([1, 0, 0]), cfg)


def test_converged_residual_within_rule():
    A, _ = linalg.build_test_matrix("hermitian_pd", np.geomspace(1e-8, 1, 6), p=5, rng=2)
    cfg = IterationConfig(p=5, m=4)
    res = compute_root(A, cfg)
    assert res.residual_inverse_pair <= 10 * termination_threshold(cfg)


def test_max_iters_reported():
    A = np.diag(np.geomspace(1e-12, 1, 4))
    res = compute_root(A, IterationConfig(p=3, m=1, mode="pade", max_iters=2))
    assert res.termination == "max_iters"
    assert res.iters == 2


def test_divergence_raised():
    # the low-order iteration leaves the convergence region for this spectrum
    A = np.diag([-1.0 + 1e-3j, 1.0])
    with pytest.raises(DivergenceError):
        compute_root(A, IterationConfig(p=3, m=0, l=1, max_iters=200, tau_override=1.0,
                                        alpha0_override=1.0))


def test_trace_csv():
    res = compute_root(np.diag([1e-6, 1.0]), IterationConfig(p=2, m=2))
    lines = res.trace_csv().splitlines()
    assert lines[0] == "k,alpha,residual_inf,mode"
    assert len(lines) == res.iters + 2
    assert lines[-1].endswith(",")


@pytest.mark.parametrize("p,m", [(2, 2), (3, 4), (5, 4), (8, 3), (9, 2)])
def test_flop_counts(p, m):
    A = np.diag(np.geomspace(1e-10, 1, 6))
    res = compute_root(A, IterationConfig(p=p, m=m, mode="pade", max_iters=3))
    first, later = res.trace[0], res.trace[1]
    powering = later.matmuls - 3
    assert first.matmuls == 1 + powering
    assert first.inversions == later.inversions == m
    if p > 2:
        beta = powering / math.log2(p - 1)
        assert 1 <= beta <= 2
    else:
        assert powering == 0


def test_kappa_scalar_identity():
    for c in (0.1, 1.0, 7.0):
        for p in (2, 3, 5):
            for n in (2, 4):
                X = c ** (1 / p) * np.eye(n)
                assert condition_number_kappa_p(c * np.eye(n), X, p) == pytest.approx(1 / p, rel=1e-8)


def test_kappa_p1_is_one():
    A = np.diag([2.0, 5.0])
    assert condition_number_kappa_p(A, A, 1) == pytest.approx(1.0)


def test_kappa_lower_bound():
    A, X = linalg.build_test_matrix("hermitian_pd", [0.1, 0.4, 2.0, 9.0], p=3, rng=5)
    S = kronecker_sum(X, 3)
    kappa = condition_number_kappa_p(A, X, 3)
    lower = linalg.norm(A, "fro") / linalg.norm(X, "fro") / np.linalg.norm(S, 2)
    assert kappa >= lower
    exact = linalg.norm(A, "fro") / linalg.norm(X, "fro") * np.linalg.norm(np.linalg.inv(S), 2)
    assert kappa == pytest.approx(exact, rel=1e-8)


def test_frechet_closed_form_examples():
    I = np.eye(3)
    E, F = frechet_closed_form(I, I, np.zeros((3, 3)), 4)
    assert np.allclose(E, I / 4) and np.allclose(F, -I / 4)
    rng = np.random.default_rng(12)
    B = rng.standard_normal((3, 3)) + 3 * np.eye(3)
    E0, F0 = rng.standard_normal((3, 3)), rng.standard_normal((3, 3))
    E1, F1 = frechet_closed_form(B, E0, F0, 3)
    E2, F2 = frechet_closed_form(B, E1, F1, 3)
    assert np.allclose(E1, E2, atol=1e-12) and np.allclose(F1, F2, atol=1e-12)


@pytest.mark.parametrize("m,p", [(1, 2), (2, 3)])
def test_frechet_fd(m, p):
    rng = np.random.default_rng(13)
    B = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) + 2 * np.eye(3)
    chk = frechet_idempotency_defect(B, m, m, p, rng=1)
    assert chk.idempotency <= 1e-4
    assert chk.agreement <= 1e-4
    assert chk.closed_form_idempotency <= 1e-12


def test_reference_relative_error_examples():
    X = np.diag([1.0, 2.0])
    r = RootResult(X, np.eye(2), 1, "converged", 0.0, 0.0)
    assert reference_relative_error(r, X) == 0
    r2 = RootResult(2 * X, np.eye(2), 1, "converged", 0.0, 0.0)
    assert reference_relative_error(r2, X) == pytest.approx(1.0)


@settings(max_examples=12, deadline=None)
@given(st.integers(2, 6), st.floats(-8, 0), st.integers(0, 1000))
def test_hermitian_pd_property(p, lo, seed):
    eigs = np.geomspace(10.0**lo, 1, 5)
    A, X = linalg.build_test_matrix("hermitian_pd", eigs, p=p, rng=seed)
    res = compute_root(A, IterationConfig(p=p, m=3))
    assert res.termination == "converged"
    assert reference_relative_error(res, X) <= 1e-11
