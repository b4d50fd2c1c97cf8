import dataclasses
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from rootiter.errors import DomainError
from rootiter.minimax import (alpha_next, asymptotic_C, asymptotic_C_exact, equioscillation_count,
                              minimax, normalize_rhat, relative_error, rhat_01, rhat_10)
from rootiter.polyrat import eval_rational


def rel_err(r, z, p):
    return np.real(relative_error(r, z, p))


def test_constant_case_closed_form():
    for p, a in [(2, 0.1), (3, 0.5), (5, 0.9)]:
        res = minimax(0, 0, p, a)
        assert res.E == pytest.approx((1 - a) / (1 + a), rel=1e-12)
        assert res.r.num.coeffs[0] == pytest.approx(2 * a / (1 + a), rel=1e-12)
        rhat = normalize_rhat(res)
        assert eval_rational(rhat, 1.0) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("p,a", [(3, 0.5), (2, 0.1), (5, 0.9)])
def test_type_10_matches_scaled_newton(p, a):
    res = minimax(1, 0, p, a)
    want = rhat_10(p, a).scaled(1 - res.E)
    assert np.allclose(res.r.num.coeffs, want.num.coeffs, atol=1e-10)


@pytest.mark.parametrize("p,a", [(3, 0.5), (2, 0.1), (5, 0.9)])
def test_type_01_matches_scaled_inverse_newton(p, a):
    res = minimax(0, 1, p, a)
    want = rhat_01(p, a).scaled(1 - res.E)
    assert np.allclose(res.r.num.coeffs, want.num.coeffs, atol=1e-10)
    assert np.allclose(res.r.den.coeffs, want.den.coeffs, atol=1e-10)


def test_rhat_10_examples():
    r = rhat_10(2, 0.25)
    assert np.allclose(r.num.coeffs, [0.25, 1.0])
    assert eval_rational(r, 0.25) == pytest.approx(0.5)
    # endpoint ratios are equal
    assert eval_rational(r, 0.0625) / 0.25 == pytest.approx(1.25)
    assert eval_rational(r, 1.0) == pytest.approx(1.25)
    mu = ((0.5 - 0.125) / (2 * 0.5)) ** (1 / 3)
    assert mu == pytest.approx(0.721125, abs=1e-6)
    for p, a in [(3, 0.5), (4, 0.2)]:
        r = rhat_10(p, a)
        mu = ((a - a**p) / ((p - 1) * (1 - a))) ** (1 / p)
        assert eval_rational(r, mu**p) == pytest.approx(mu, rel=1e-14)


def test_rhat_01_examples():
    nu = (3 * 0.75 / (1 - 0.015625)) ** 0.5
    assert nu == pytest.approx(1.511858, abs=1e-6)
    for p, a in [(2, 0.25), (3, 0.5), (5, 0.1)]:
        r = rhat_01(p, a)
        nu = ((p + 1) * (1 - a) / (1 - a ** (p + 1))) ** (1 / p)
        assert eval_rational(r, nu ** (-p)) == pytest.approx(1 / nu, rel=1e-13)
        assert rel_err(r, a**p, p) == pytest.approx(rel_err(r, 1.0, p), abs=1e-12)


def test_alpha_next_examples():
    assert alpha_next(0.3, 0.0) == 1
    for a in (0.1, 0.5, 0.77):
        assert alpha_next(a, (1 - a) / (1 + a)) == pytest.approx(a)
    assert alpha_next(0.5, 1 / 3) == pytest.approx(0.5)
    with pytest.raises(DomainError):
        alpha_next(0.5, 1.0)


def test_asymptotic_C_examples():
    assert asymptotic_C_exact(2, 2, 3) == Fraction(7, 288)
    for p in (2, 3, 7):
        assert asymptotic_C(1, 0, p) == pytest.approx((p - 1) / 4, rel=1e-15)
    for m in range(1, 7):
        for l in (m - 1, m):
            assert asymptotic_C_exact(m, l, 2) == Fraction(1, 4 ** (m + l))


def test_type_11_equioscillates_four_times():
    res = minimax(1, 1, 2, 0.1)
    z = np.geomspace(0.01, 1, 100_000)
    e = rel_err(res.r, z, 2)
    near = np.abs(np.abs(e) - res.E) < 1e-6 * res.E
    signs = np.sign(e[near])
    alternations = 1 + np.count_nonzero(np.diff(signs) != 0)
    assert alternations == 4
    count = equioscillation_count(lambda t: rel_err(res.r, t, 2), 0.01, 1.0, expected=4)
    assert count == 4


def test_equioscillation_count_constant():
    assert equioscillation_count(lambda z: np.full_like(z, 0.2), 0.1, 1.0) == 1


@pytest.mark.parametrize("m,l,p,a", [(1, 1, 2, 0.1), (2, 2, 3, 0.2), (3, 2, 5, 0.05),
                                     (4, 4, 3, 1e-3), (8, 8, 3, 10 ** (-16 / 3))])
def test_minimax_invariants(m, l, p, a):
    res = minimax(m, l, p, a)
    nodes = np.asarray(res.nodes)
    assert len(nodes) == m + l + 2
    assert nodes[0] == pytest.approx(a**p, rel=1e-12)
    assert nodes[-1] == pytest.approx(1.0)
    assert res.certified_lower <= res.E <= res.certified_lower * (1 + 1e-10)
    if res.E > 1e-8:
        e = rel_err(res.r, nodes, p)
        assert np.all(np.abs(np.abs(e) - res.E) <= 1e-6 * res.E)
        assert np.all(np.sign(e[1:]) == -np.sign(e[:-1]))
    # positive denominator on the interval
    z = np.geomspace(a**p, 1, 2000)
    assert np.all(np.real(eval_rational(res.r.reciprocal(), z)) > 0)


def test_error_agrees_with_mp_oracle():
    res = minimax(2, 2, 3, 0.2)
    z = np.geomspace(0.2**3, 1, 3000)
    with mpmath.workdps(30):
        num = [mpmath.mpf(float(c)) for c in res.r.num.coeffs]
        den = [mpmath.mpf(float(c)) for c in res.r.den.coeffs]
        worst = max(abs(mpmath.polyval(num[::-1], t) / mpmath.polyval(den[::-1], t)
                        / mpmath.root(t, 3) - 1) for t in map(mpmath.mpf, z))
    assert float(worst) == pytest.approx(res.E, rel=1e-6)


def test_error_decreases_with_degree():
    Es = [minimax(m, m, 3, 0.1).E for m in range(0, 5)]
    assert all(b < a for a, b in zip(Es, Es[1:]))


def test_error_increases_as_interval_widens():
    Es = [minimax(2, 2, 3, a).E for a in (0.9, 0.5, 0.1, 0.01)]
    assert all(b > a for a, b in zip(Es, Es[1:]))


def test_normalize_rhat_zero_error():
    res = dataclasses.replace(minimax(2, 1, 3, 0.4), E=0.0, E_mp=None)
    assert np.array_equal(normalize_rhat(res).num.coeffs, res.r.num.coeffs)


def test_alpha_out_of_range():
    with pytest.raises(DomainError):
        minimax(1, 1, 2, 0.0)
    with pytest.raises(DomainError):
        minimax(1, 1, 2, 1.5)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.01, 0.99), st.floats(0.0, 0.99))
def test_alpha_next_in_unit_interval(a, E):
    b = alpha_next(a, E)
    assert 0 < b <= 1
    assert (1 - b) / (1 + b) == pytest.approx(E, abs=1e-12)
