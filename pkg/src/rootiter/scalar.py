"""Scalar form of the rational minimax p-th root iteration.

``f_{k+1}(z) = f_k(z) * rhat_k(z / f_k(z)**p)`` with ``f_0 = 1``, where
``rhat_k`` is the normalized best approximant on ``[alpha_k**p, 1]``.  The
rescaled iterate ``(2 alpha_k / (1 + alpha_k)) f_k`` approximates z**(1/p)
with maximal relative error ``eps_k`` on ``[alpha**p, 1]``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import mpmath
import numpy as np

from .errors import DomainError, IterateOverflowError
from .minimax import (MinimaxResult, alpha_next, asymptotic_C, equioscillation_count, minimax,
                      normalize_rhat)
from .polyrat import RationalFunction, eval_poly, eval_rational, pade_coeffs, pade_coeffs_exact

OVERFLOW_GUARD = 1e150
UNRELIABLE_BELOW = 1e-15
PRECISE_BELOW = 1e-8  # eps_k below which error curves are sampled in extended precision


def step_factor(m: int, l: int, p: int, alpha: float):
    """``(rhat, result, alpha_next)`` for one step; ``alpha >= 1`` selects Pade."""
    if alpha >= 1:
        return pade_coeffs(m, l, p), None, 1.0
    res = minimax(m, l, p, alpha)
    return normalize_rhat(res), res, alpha_next(alpha, res.E)


def scalar_step(z, f, alpha: float, m: int, l: int, p: int):
    """One step of the scalar iteration: returns ``(f_next, alpha_next)``.

    ``alpha_next`` is ``alpha / rhat(alpha**p)`` evaluated directly.
    """
    if not 0 < alpha <= 1:
        raise DomainError("alpha must lie in (0, 1]")
    rhat, _, _ = step_factor(m, l, p, alpha)
    f = np.asarray(f, dtype=complex if np.iscomplexobj(z) or np.iscomplexobj(f) else float)
    if np.any(f == 0):
        raise DomainError("f must be nonzero")
    f_next = f * eval_rational(rhat, z / f**p)
    if np.any(np.abs(f_next) > OVERFLOW_GUARD):
        raise IterateOverflowError("|f| exceeded the overflow guard")
    a_next = alpha / eval_rational(rhat, alpha**p)
    f_next = np.asarray(f_next)
    return (f_next if f_next.ndim else f_next.item()), float(a_next)


@dataclass(frozen=True)
class ScalarIterState:
    k: int
    alpha_k: float
    eps_k: float
    factors: tuple  # ((alpha_j, rhat_j), ...) for j < k


class ScalarIteration:
    """The first ``K`` steps of the iteration, stored as per-step factors.

    ``f_k`` is evaluated by replaying the factors, never by expanding the
    composite rational function.  With ``pade_switch`` set, every alpha above
    it is replaced by 1 (Pade factors from then on).
    """

    def __init__(self, m: int, l: int, p: int, alpha: float, K: int, pade_switch=None):
        if (m, l) == (0, 0):
            raise DomainError("(m, l) = (0, 0) does not iterate")
        if not 0 < alpha <= 1:
            raise DomainError("alpha must lie in (0, 1]")
        self.m, self.l, self.p, self.K = m, l, p, K
        self.alpha0 = alpha
        self.alphas = [alpha]
        self.eps = [(1 - alpha) / (1 + alpha)]
        self.factors: list[tuple[float, RationalFunction]] = []
        self.results: list[MinimaxResult | None] = []
        a = alpha
        for _ in range(K):
            if pade_switch is not None and a > pade_switch:
                a = 1.0
                self.alphas[-1] = 1.0
            rhat, res, a_next = step_factor(m, l, p, a)
            self.factors.append((a, rhat))
            self.results.append(res)
            self.eps.append(res.E if res is not None else 0.0)
            a = a_next
            self.alphas.append(a)

    @classmethod
    def pade(cls, m, l, p, K):
        return cls(m, l, p, 1.0, K)

    def state(self, k: int) -> ScalarIterState:
        return ScalarIterState(k, self.alphas[k], self.eps[k], tuple(self.factors[:k]))

    def scale(self, k: int) -> float:
        a = self.alphas[k]
        return 2 * a / (1 + a)

    def f(self, z, k: int):
        """``f_k(z)``, vectorized; poles and overflow propagate as inf/nan."""
        z = np.asarray(z)
        f = np.ones(z.shape, dtype=np.result_type(z, float))
        with np.errstate(all="ignore"):
            for _, rhat in self.factors[:k]:
                w = z / f**self.p
                f = f * (eval_poly(rhat.num, w) / eval_poly(rhat.den, w))
        return f if f.ndim else f.item()

    def f_tilde(self, z, k: int):
        return self.scale(k) * np.asarray(self.f(z, k))

    def relative_error(self, z, k: int):
        z = np.asarray(z)
        root = np.power(z.astype(complex), 1.0 / self.p) if np.iscomplexobj(z) else z ** (1.0 / self.p)
        with np.errstate(all="ignore"):
            return self.f_tilde(z, k) / root - 1

    def _mp_factors(self, k):
        out = []
        for (a, _), res in zip(self.factors[:k], self.results[:k]):
            if res is None:
                num, den = pade_coeffs_exact(self.m, self.l, self.p)
                out.append(([mpmath.mpf(c.numerator) / c.denominator for c in num],
                            [mpmath.mpf(c.numerator) / c.denominator for c in den]))
            else:
                out.append(res.rhat_mp())
        return out

    def relative_error_mp(self, t, k: int, dps: int = 40):
        """Relative error of ``f~_k`` at ``z = t**p`` in extended precision.

        ``t`` is a sequence of positive reals (``t = z**(1/p)``); returns floats.
        """
        with mpmath.workdps(dps):
            facs = self._mp_factors(k)
            a = mpmath.mpf(self.alphas[k])
            if k > 0 and self.alphas[k] < 1 and self.results[k - 1] is not None:
                a = (1 - self.results[k - 1].E_mp) / (1 + self.results[k - 1].E_mp)
            scale = 2 * a / (1 + a)
            out = []
            for ti in np.atleast_1d(t):
                ti = mpmath.mpf(float(ti))
                z = ti**self.p
                f = mpmath.mpf(1)
                for num, den in facs:
                    w = z / f**self.p
                    f = f * mpmath.polyval(num[::-1], w) / mpmath.polyval(den[::-1], w)
                out.append(float(scale * f / ti - 1))
        return np.array(out)


    def error_function(self, k: int, precise: bool | None = None):
        """Vectorized relative error of ``f~_k`` as a function of real ``z > 0``.

        Evaluates in extended precision when ``precise`` is true, or by
        default whenever ``eps_k`` is within a few digits of roundoff.
        """
        if precise is None:
            precise = self.eps[k] < PRECISE_BELOW
        if precise:
            return lambda z: self.relative_error_mp(np.asarray(z) ** (1.0 / self.p), k)
        return lambda z: self.relative_error(np.asarray(z, dtype=float), k)

    def equioscillation(self, k: int, level_tol: float = 1e-6, precise: bool | None = None):
        """``(count, endpoint_values, max_abs)`` for the error of ``f~_k`` on ``[alpha**p, 1]``."""
        err = self.error_function(k, precise)
        a = self.alpha0**self.p
        expected = (self.m + self.l + 1) ** k + 1
        count = equioscillation_count(err, a, 1.0, level_tol=level_tol, expected=expected)
        ends = err(np.array([a, 1.0]))
        grid = np.geomspace(a, 1.0, 4096 * expected)
        top = max(float(np.max(np.abs(err(grid)))), float(np.max(np.abs(ends))))
        return count, ends, top


def eps_recursion(m: int, l: int, p: int, eps0: float, K: int) -> list[float]:
    """``eps_{k+1} = E_{m,l}`` on ``[((1-eps_k)/(1+eps_k))**p, 1]`` for k < K."""
    if not 0 < eps0 < 1:
        raise DomainError("eps0 must lie in (0, 1)")
    if (m, l) == (0, 0):
        raise DomainError("(m, l) = (0, 0) does not contract")
    eps = [eps0]
    for _ in range(K):
        a = (1 - eps[-1]) / (1 + eps[-1])
        # an interval that has collapsed to {1} is approximated exactly
        eps.append(minimax(m, l, p, a).E if a < 1 else 0.0)
    return eps


@dataclass(frozen=True)
class RatioRow:
    k: int
    eps: float
    ratio: float | None
    unreliable: bool = False


@dataclass(frozen=True)
class RatioTable:
    m: int
    l: int
    p: int
    rows: tuple
    C: float

    def last_reliable(self) -> RatioRow | None:
        good = [r for r in self.rows if r.ratio is not None and not r.unreliable]
        return good[-1] if good else None

    def to_csv(self) -> str:
        lines = ["k,eps_k,ratio,flag"]
        for r in self.rows:
            ratio = "" if r.ratio is None else f"{r.ratio:.16e}"
            flag = "unreliable" if r.unreliable and r.ratio is not None else ""
            lines.append(f"{r.k},{r.eps:.16e},{ratio},{flag}")
        lines.append(f"C,{self.C:.16e}")
        return "\n".join(lines) + "\n"


def ratio_table(m: int, l: int, p: int, eps0: float, K: int) -> RatioTable:
    """Rows ``(k, eps_k, eps_k / eps_{k-1}**(m+l+1))``; ratios whose ``eps_k``
    is below 1e-15 are flagged unreliable."""
    eps = eps_recursion(m, l, p, eps0, K)
    n = m + l + 1
    rows = [RatioRow(0, eps[0], None)]
    for k in range(1, len(eps)):
        denom = eps[k - 1] ** n
        ratio = eps[k] / denom if denom > 0 else None
        rows.append(RatioRow(k, eps[k], ratio, ratio is None or eps[k] < UNRELIABLE_BELOW))
    return RatioTable(m, l, p, tuple(rows), asymptotic_C(m, l, p))


# -- complex-plane convergence regions -----------------------------------------

NONCONVERGED = -1


@dataclass(frozen=True)
class RegionRequest:
    log10_abs: tuple = (-10.0, 0.0)
    arg: tuple = (-math.pi, math.pi)
    shape: tuple = (800, 800)  # (n_log10_abs, n_arg)


@dataclass(frozen=True, eq=False)
class RegionGrid:
    """Per-cell smallest ``k' <= k`` with relative error ``<= delta``.

    ``k_converged[i, j]`` belongs to ``arg[i]`` and ``log10_abs[j]``;
    ``rotation[i, j]`` is ``j >= 1`` when the iterate settled on
    ``exp(2 pi i j / p) z**(1/p)`` instead, else -1.
    """

    log10_abs: np.ndarray
    arg: np.ndarray
    k_converged: np.ndarray
    rotation: np.ndarray
    k: int
    delta: float
    p: int
    mode: str = "minimax"
    steps: tuple = field(default=(0.0, 0.0))

    def counts(self) -> dict:
        vals, cnt = np.unique(self.k_converged, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, cnt)}

    def to_csv(self) -> str:
        lines = ["log10_abs,arg,k_converged,rotation_index"]
        for i, th in enumerate(self.arg):
            for j, lg in enumerate(self.log10_abs):
                rot = self.rotation[i, j]
                lines.append(
                    f"{lg:.16e},{th:.16e},{int(self.k_converged[i, j])},{'' if rot < 0 else int(rot)}"
                )
        return "\n".join(lines) + "\n"


def _worker_count():
    cap = os.environ.get("ROOTITER_THREADS")
    n = os.cpu_count() or 1
    if cap:
        n = max(1, min(n, int(cap)))
    return n


def _classify(z, it: ScalarIteration, k, delta, p, zscale):
    w = z / zscale
    with np.errstate(all="ignore"):
        root = np.power(w, 1.0 / p)
        kconv = np.full(z.shape, NONCONVERGED, dtype=np.int64)
        f = np.ones(z.shape, dtype=complex)
        alive = np.ones(z.shape, dtype=bool)
        for j in range(k + 1):
            if j > 0:
                _, rhat = it.factors[j - 1]
                u = w / f**p
                f = f * (eval_poly(rhat.num, u) / eval_poly(rhat.den, u))
                alive &= np.isfinite(f) & (np.abs(f) <= OVERFLOW_GUARD)
            ratio = it.scale(j) * f / root
            hit = alive & (kconv == NONCONVERGED) & (np.abs(ratio - 1) <= delta)
            kconv[hit] = j
        rot = np.full(z.shape, -1, dtype=np.int64)
        for r in range(1, p):
            near = alive & (kconv == NONCONVERGED) & (np.abs(ratio - np.exp(2j * np.pi * r / p)) <= delta)
            rot[near] = r
    return kconv, rot


def region_sample(request: RegionRequest, k: int, delta: float, alpha: float, m: int, l: int,
                  p: int, mode: str = "minimax", workers: int | None = None) -> RegionGrid:
    """Classify a ``(log10|z|, arg z)`` grid by iterations needed to reach ``delta``.

    ``mode="pade"`` uses ``alpha_0 = 1`` and evaluates at ``z / alpha**(p/2)``.
    Rows of the grid are distributed over a thread pool (capped by the
    ``ROOTITER_THREADS`` environment variable); results are merged by index.
    """
    if delta <= 0:
        raise DomainError("delta must be positive")
    if mode not in ("minimax", "pade"):
        raise DomainError(f"unknown mode {mode!r}")
    n_abs, n_arg = request.shape
    lg = np.linspace(*request.log10_abs, n_abs)
    th = np.linspace(*request.arg, n_arg)
    if mode == "pade":
        it = ScalarIteration.pade(m, l, p, k)
        zscale = alpha ** (p / 2)
    else:
        it = ScalarIteration(m, l, p, alpha, k)
        zscale = 1.0
    Z = (10.0 ** lg)[None, :] * np.exp(1j * th)[:, None]
    workers = workers or _worker_count()
    chunks = np.array_split(np.arange(n_arg), max(1, min(workers, n_arg)))
    kconv = np.empty(Z.shape, dtype=np.int64)
    rot = np.empty(Z.shape, dtype=np.int64)

    def run(rows):
        return rows, _classify(Z[rows], it, k, delta, p, zscale)

    with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
        for rows, (kc, rt) in pool.map(run, chunks):
            kconv[rows], rot[rows] = kc, rt
    steps = (
        (lg[1] - lg[0]) if n_abs > 1 else 0.0,
        (th[1] - th[0]) if n_arg > 1 else 0.0,
    )
    return RegionGrid(lg, th, kconv, rot, k, delta, p, mode, steps)
