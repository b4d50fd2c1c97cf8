"""Acceptance checks, shared by the test suite and ``rootiter selftest``.

Each ``check_*`` function returns a :class:`Check` whose ``detail`` string
summarizes the measured quantities next to their tolerances.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import linalg
from .errors import DivergenceError
from .matroot import (IterationConfig, compute_root, condition_number_kappa_p,
                      frechet_idempotency_defect, reference_relative_error)
from .minimax import asymptotic_C, asymptotic_C_exact, minimax, normalize_rhat, rhat_01, rhat_10
from .polyrat import pade_coeffs
from .scalar import ScalarIteration, eps_recursion, ratio_table

UNIT_ROUNDOFF = 2.0**-53


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail} ({self.seconds:.1f}s)"


def _timed(name, fn):
    t0 = time.perf_counter()
    passed, detail = fn()
    return Check(name, bool(passed), detail, time.perf_counter() - t0)


# 1 ---------------------------------------------------------------------------------


def choose_eps0(m, l, p, target=1e-12, lo=1e-3, hi=0.99, steps=40):
    """Bisect (in log) for the eps0 whose eps_2 is ``target``; eps_2 grows with eps0."""
    a, b = math.log(lo), math.log(hi)
    for _ in range(steps):
        mid = 0.5 * (a + b)
        if eps_recursion(m, l, p, math.exp(mid), 2)[2] < target:
            a = mid
        else:
            b = mid
    return math.exp(b)


RATIO_CASES = ((1, 1, 13), (2, 2, 3), (3, 3, 5))


def check_ratio_constants():
    def run():
        parts, ok = [], True
        for m, l, p in RATIO_CASES:
            eps0 = choose_eps0(m, l, p)
            table = ratio_table(m, l, p, eps0, 4)
            row = table.last_reliable()
            C = asymptotic_C(m, l, p)
            good = row is not None and table.rows[2].eps > 1e-14 and abs(row.ratio / C - 1) <= 0.10
            ok &= good
            parts.append(f"({m},{l},{p}) eps0={eps0:.3g} eps2={table.rows[2].eps:.2e} "
                         f"k={row.k if row else None} ratio/C={row.ratio / C if row else float('nan'):.4f}")
        exact = asymptotic_C_exact(2, 2, 3) == Fraction(7, 288)
        ok &= exact
        parts.append(f"C(2,2,3)==7/288: {exact}")
        return ok, "; ".join(parts)

    return _timed("1 convergence-constant ratios", run)


# 2 ---------------------------------------------------------------------------------


def check_p2_constant():
    def run():
        worst, exact = 0.0, True
        for m in range(0, 7):
            for l in (m - 1, m):
                if l < 0 or (m, l) == (0, 0):
                    continue
                want = Fraction(1, 4 ** (m + l))
                exact &= asymptotic_C_exact(m, l, 2) == want
                worst = max(worst, abs(asymptotic_C(m, l, 2) / float(want) - 1))
        return exact and worst <= 1e-15, f"exact={exact} max rel err={worst:.1e}"

    return _timed("2 C(m,l,2) = 4^-(m+l)", run)


# 3 ---------------------------------------------------------------------------------


def first_k_below(errors_by_k, delta):
    for k, e in enumerate(errors_by_k):
        if e <= delta:
            return k
    return None


def check_iteration_counts():
    def run():
        p, m, delta = 3, 8, 1e-14
        alpha = 10 ** (-16 / 3)
        z = np.logspace(-16, 0, 200)
        mini = ScalarIteration(m, m, p, alpha, 3)
        e_mini = [float(np.max(np.abs(mini.relative_error(z, k)))) for k in range(4)]
        pade = ScalarIteration.pade(m, m, p, 6)
        w = z / alpha ** (p / 2)
        e_pade = [float(np.max(np.abs(pade.relative_error(w, k)))) for k in range(7)]
        k_mini, k_pade = first_k_below(e_mini, delta), first_k_below(e_pade, delta)
        ok = k_mini == 2 and k_pade is not None and 4 <= k_pade <= 5
        return ok, (f"minimax k={k_mini} (errors {', '.join(f'{e:.1e}' for e in e_mini)}); "
                    f"pade k={k_pade} (errors {', '.join(f'{e:.1e}' for e in e_pade)})")

    return _timed("3 iteration-count separation", run)


# 4 ---------------------------------------------------------------------------------


def check_equioscillation():
    def run():
        ok, parts = True, []
        for p in (2, 3):
            for m, l in ((1, 1), (2, 1)):
                it = ScalarIteration(m, l, p, 0.3, 2)
                for k in (1, 2):
                    count, ends, top = it.equioscillation(k)
                    want = (m + l + 1) ** k + 1
                    end_gap = float(np.max(np.abs(1 - np.abs(ends) / top)))
                    good = count == want and end_gap <= 1e-9
                    ok &= good
                    parts.append(f"p={p} ({m},{l}) k={k}: {count}/{want} end gap {end_gap:.0e}")
        return ok, "; ".join(parts)

    return _timed("4 equioscillation law", run)


# 5 ---------------------------------------------------------------------------------


def _coeff_distance(r, s):
    a = np.zeros(max(len(r.num.coeffs), len(s.num.coeffs)))
    b = a.copy()
    a[: len(r.num.coeffs)] = r.num.coeffs
    b[: len(s.num.coeffs)] = s.num.coeffs
    c = np.zeros(max(len(r.den.coeffs), len(s.den.coeffs)))
    d = c.copy()
    c[: len(r.den.coeffs)] = r.den.coeffs
    d[: len(s.den.coeffs)] = s.den.coeffs
    return float(max(np.max(np.abs(a - b)), np.max(np.abs(c - d))))


def check_closed_forms():
    def run():
        worst = 0.0
        for p in (2, 3, 5):
            for alpha in (0.1, 0.5, 0.9):
                worst = max(worst, _coeff_distance(normalize_rhat(minimax(1, 0, p, alpha)), rhat_10(p, alpha)))
                worst = max(worst, _coeff_distance(normalize_rhat(minimax(0, 1, p, alpha)), rhat_01(p, alpha)))
        return worst <= 1e-10, f"max coefficient distance {worst:.1e}"

    return _timed("5 (1,0)/(0,1) closed forms", run)


# 6 ---------------------------------------------------------------------------------


def check_pade_limit():
    def run():
        ok, parts = True, []
        for m, l, p in ((1, 1, 3), (2, 2, 3)):
            P = pade_coeffs(m, l, p)
            dist = [_coeff_distance(minimax(m, l, p, a).r, P) for a in (0.9, 0.99, 0.999)]
            good = dist[0] > dist[1] > dist[2]
            ok &= good
            parts.append(f"({m},{l},{p}): " + " > ".join(f"{d:.2e}" for d in dist))
        return ok, "; ".join(parts)

    return _timed("6 Pade limit", run)


# 7 ---------------------------------------------------------------------------------

BOUND_SLACK = 1e-12  # roundoff allowance on the exact-arithmetic bounds


def hermitian_bounds(p, m=2, l=2, alpha=None, n=10, seed=7):
    """Largest violation of the two 2-norm bounds and the final reference error.

    The spectrum is log-spaced on ``[alpha**p, 1]``, by default ``[1e-4, 1]``.
    """
    alpha = 10 ** (-4 / p) if alpha is None else alpha
    A, X = linalg.build_test_matrix("hermitian_pd", np.logspace(p * math.log10(alpha), 0, n), p=p,
                                    rng=seed)
    Xinv = np.linalg.inv(X)
    eye = np.eye(n)
    records = []

    def cb(st):
        if st.mode == "minimax":
            records.append((st.k, st.alpha, st.Y.copy(), st.Z.copy()))

    cfg = IterationConfig(p=p, m=m, l=l, tau_override=1.0, alpha0_override=alpha)
    res = compute_root(A, cfg, callback=cb)
    eps = eps_recursion(m, l, p, (1 - alpha) / (1 + alpha), max(k for k, *_ in records))
    worst = -math.inf
    for k, a, Y, Z in records:
        s = (1 + a) / (2 * a)
        Yt, Zt = s ** (p - 1) * Y, s * Z
        e = eps[k]
        by = ((1 + e) ** (p - 1) - 1) / (1 - e) ** (p - 1)
        bz = e / (1 - e)
        worst = max(worst, np.linalg.norm(Yt @ Xinv - eye, 2) - by, np.linalg.norm(Zt @ X - eye, 2) - bz)
    return worst, reference_relative_error(res, X), len(records)


def check_hermitian_bounds():
    def run():
        ok, parts = True, []
        for p in (2, 3, 5):
            worst, err, nk = hermitian_bounds(p)
            good = worst <= BOUND_SLACK and err <= 1e-12
            ok &= good
            parts.append(f"p={p}: max(lhs-bound)={worst:.1e} over {nk} steps, ref err {err:.1e}")
        return ok, "; ".join(parts)

    return _timed("7 Hermitian PD bounds", run)


# 8 ---------------------------------------------------------------------------------


def check_stability():
    def run():
        rng = np.random.default_rng(35)
        Bs = [rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3)) for _ in range(5)]
        idem = agree = 0.0
        for B in Bs:
            for m, l in ((1, 1), (2, 2)):
                for p in (2, 3):
                    chk = frechet_idempotency_defect(B, m, l, p, rng=rng)
                    idem, agree = max(idem, chk.idempotency), max(agree, chk.agreement)
        return idem <= 1e-4 and agree <= 1e-4, f"idempotency {idem:.1e}, closed-form agreement {agree:.1e}"

    return _timed("8 Frechet idempotency", run)


# 9 ---------------------------------------------------------------------------------


def check_kappa_identity():
    def run():
        worst = 0.0
        for c in (0.1, 1.0, 7.0):
            for p in (2, 3, 5):
                for n in (2, 4):
                    A = c * np.eye(n)
                    X = c ** (1 / p) * np.eye(n)
                    worst = max(worst, abs(condition_number_kappa_p(A, X, p) * p - 1))
        return worst <= 1e-8, f"max |p kappa - 1| = {worst:.1e}"

    return _timed("9 kappa(cI) = 1/p", run)


# 10 --------------------------------------------------------------------------------


def stability_corpus(seed=2024, n=10):
    """20 ``(kind, spectrum, conditioning)`` triples with kappa spread over ~1e0..1e8."""
    rng = np.random.default_rng(seed)
    out = [("hermitian_pd", np.logspace(-2.4 * i, 0, n), 1.0) for i in range(6)]
    for i in range(10):
        mags = np.logspace(-rng.uniform(0, 4), 0, n)
        args = rng.uniform(-0.9 * np.pi, 0.9 * np.pi, n)
        out.append(("diagonalizable", mags * np.exp(1j * args), 10 ** (0.5 * i)))
    for i in range(4):
        base = np.exp(1j * rng.uniform(-0.8 * np.pi, 0.8 * np.pi, n // 2)) * np.logspace(-rng.uniform(0, 3), 0, n // 2)
        out.append(("jordan_like", np.repeat(base, 2), 10.0**i))
    return out, rng


def forward_stability(p=3, m=4, seed=2024):
    corpus, rng = stability_corpus(seed)
    rows = []
    for kind, spectrum, cond in corpus:
        A, X = linalg.build_test_matrix(kind, spectrum, cond, p=p, rng=rng)
        kappa = condition_number_kappa_p(A, X, p)
        try:
            res = compute_root(A, IterationConfig(p=p, m=m))
            err = reference_relative_error(res, X)
        except DivergenceError:
            err = None
        rows.append((kind, kappa, err))
    return rows


def check_forward_stability():
    def run():
        rows = forward_stability()
        ok_count = sum(1 for _, k, e in rows if e is not None and e <= 100 * UNIT_ROUNDOFF * k)
        div = [kind for kind, _, e in rows if e is None]
        hpd_div = sum(1 for kind in div if kind == "hermitian_pd")
        kappas = [k for _, k, _ in rows]
        ok = ok_count >= 18 and hpd_div == 0
        return ok, (f"{ok_count}/20 within 100 u kappa, {len(div)} divergences "
                    f"({hpd_div} Hermitian PD), kappa in [{min(kappas):.1e}, {max(kappas):.1e}]")

    return _timed("10 forward-stability proxy", run)


ALL_CHECKS = (
    check_ratio_constants,
    check_p2_constant,
    check_iteration_counts,
    check_equioscillation,
    check_closed_forms,
    check_pade_limit,
    check_hermitian_bounds,
    check_stability,
    check_kappa_identity,
    check_forward_stability,
)


def run_all(report=print) -> bool:
    ok = True
    for fn in ALL_CHECKS:
        chk = fn()
        report(chk.line())
        ok &= chk.passed
    return ok
