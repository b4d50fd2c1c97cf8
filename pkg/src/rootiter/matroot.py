"""Coupled rational minimax iteration for the matrix p-th root.

The iteration carries ``Y_k -> A**(1/p)`` and ``Z_k -> A**(-1/p)`` (up to the
scalings ``tau`` and ``alpha_k``) and only ever applies the reciprocal
``h = 1/rhat`` of the normalized approximant to the product ``Z_k Y_k``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import mpmath
import numpy as np

from . import linalg
from .errors import (DivergenceError, DomainError, MultiplePoleError, SingularMatrixError)
from .minimax import (MinimaxResult, _mu, _nu, alpha_next, asymptotic_C, minimax, normalize_rhat,
                      rhat_01, rhat_10)
from .polyrat import (ROOT_SEPARATION, PartialFractions, RationalFunction, pade_coeffs,
                      to_partial_fractions)

DIVERGENCE_GUARD = 1e100
MODES = ("minimax", "pade")


@dataclass(frozen=True)
class IterationConfig:
    p: int
    m: int = 8
    l: int | None = None  # defaults to m
    delta: float = 1e-15
    alpha_pade_switch: float = 0.99
    max_iters: int = 30
    mode: str = "minimax"
    tau_override: float | None = None
    alpha0_override: float | None = None
    pole_separation: float = ROOT_SEPARATION
    monitor_commutator: bool = False

    def __post_init__(self):
        if self.l is None:
            object.__setattr__(self, "l", self.m)
        if self.p < 2:
            raise DomainError("p must be >= 2")
        if self.m < 0 or self.l < 0 or (self.m, self.l) == (0, 0):
            raise DomainError("need m, l >= 0 and (m, l) != (0, 0)")
        if not self.delta > 0:
            raise DomainError("delta must be positive")
        if not 0 < self.alpha_pade_switch <= 1:
            raise DomainError("alpha_pade_switch must lie in (0, 1]")
        if self.mode not in MODES:
            raise DomainError(f"mode must be one of {MODES}")
        if self.max_iters < 1:
            raise DomainError("max_iters must be >= 1")


@dataclass
class IterationState:
    Y: np.ndarray
    Z: np.ndarray
    alpha: float
    k: int
    tau: float
    mode: str


@dataclass(frozen=True)
class TraceRecord:
    k: int
    alpha: float
    residual_inf: float  # ||Z~_k Y~_k - I||_inf
    mode: str  # factor applied in the step leaving iterate k ("" for the final one)
    wall_time: float
    matmuls: int = 0
    inversions: int = 0
    commutator: float | None = None


@dataclass
class RootResult:
    Y_tilde: np.ndarray
    Z_tilde: np.ndarray
    iters: int
    termination: str
    residual_defining: float
    residual_inverse_pair: float
    trace: list = field(default_factory=list)
    tau: float = 1.0
    alpha0: float = 1.0

    def trace_csv(self) -> str:
        lines = ["k,alpha,residual_inf,mode"]
        for t in self.trace:
            lines.append(f"{t.k},{t.alpha:.16e},{t.residual_inf:.16e},{t.mode}")
        return "\n".join(lines) + "\n"


# -- the rational factor h = 1/rhat -----------------------------------------------


class HFactor(NamedTuple):
    """``h`` either as partial fractions or as a plain ratio of polynomials."""

    h: RationalFunction
    pf: PartialFractions | None


def _mp_partial_fractions(res: MinimaxResult, separation):
    # h = den/num with rhat = num/den; poles of h are the zeros of rhat
    num, den = res.rhat_mp()
    num, den = list(num), list(den)
    while len(num) > 1 and num[-1] == 0:
        num.pop()
    while len(den) > 1 and den[-1] == 0:
        den.pop()
    if len(den) > len(num) or len(num) < 2:
        return None
    with mpmath.workdps(res.dps):
        roots = mpmath.polyroots(num[::-1], maxsteps=400, extraprec=4 * res.dps)
        z = np.array([complex(r) for r in roots])
        mag = np.abs(z)
        if z.size > 1:
            gaps = np.abs(z[:, None] - z[None, :])
            np.fill_diagonal(gaps, np.inf)
            if np.any(gaps <= separation * np.maximum(mag[:, None], mag[None, :])):
                raise MultiplePoleError("zeros of rhat are not well separated")
        dnum = [k * c for k, c in enumerate(num)][1:]
        residues = [mpmath.polyval(den[::-1], r) / mpmath.polyval(dnum[::-1], r) for r in roots]
        a0 = den[-1] / num[-1] if len(den) == len(num) else mpmath.mpf(0)
        return PartialFractions(complex(a0), np.array([complex(a) for a in residues]), -z)


def h_factor(m: int, l: int, p: int, alpha: float, separation: float = ROOT_SEPARATION):
    """``(HFactor, alpha_next)`` for one step; ``alpha >= 1`` gives the Pade factor."""
    if alpha >= 1:
        h = pade_coeffs(m, l, p).reciprocal()
        try:
            pf = to_partial_fractions(h, separation=separation) if h.num.degree <= h.den.degree else None
        except MultiplePoleError:
            pf = None
        return HFactor(h, pf), 1.0
    res = minimax(m, l, p, alpha)
    h = normalize_rhat(res).reciprocal()
    try:
        pf = _mp_partial_fractions(res, separation)
    except MultiplePoleError:
        pf = None
    return HFactor(h, pf), alpha_next(alpha, res.E)


def _poly_at_matrix(coeffs, M):
    n = M.shape[0]
    acc = coeffs[-1] * np.eye(n, dtype=complex)
    for c in coeffs[-2::-1]:
        acc = linalg.matmul(acc, M)
        acc[np.diag_indices(n)] += c
    return acc


def apply_h(hf: HFactor, M: np.ndarray) -> np.ndarray:
    """``h(M)``; partial fractions need one inversion per pole."""
    n = M.shape[0]
    eye = np.eye(n, dtype=complex)
    if hf.pf is not None:
        H = hf.pf.a0 * eye
        for a, b in hf.pf.terms:
            lu = linalg.lu_factor(M + b * eye)
            if lu.singular:
                raise SingularMatrixError(f"Z Y + b I is singular for b = {b}")
            H = H + a * linalg.lu_solve(lu, eye)
        return H
    N = _poly_at_matrix(hf.h.num.coeffs, M)
    if hf.h.den.degree == 0:
        return N / hf.h.den.coeffs[0]
    D = _poly_at_matrix(hf.h.den.coeffs, M)
    lu = linalg.lu_factor(D)
    if lu.singular:
        raise SingularMatrixError("denominator of h is singular at Z Y")
    return linalg.lu_solve(lu, N)


# -- termination -----------------------------------------------------------------


def termination_threshold(cfg: IterationConfig) -> float:
    C = asymptotic_C(cfg.m, cfg.l, cfg.p)
    return cfg.p * (cfg.delta / ((cfg.p - 1) * C)) ** (1.0 / (cfg.m + cfg.l + 1))


def termination_check(ZY_product, cfg: IterationConfig) -> bool:
    """True when ``||Z~ Y~ - I||_inf`` is below the order-aware threshold."""
    R = np.asarray(ZY_product, dtype=complex) - np.eye(np.shape(ZY_product)[0])
    return linalg.norm(R, "inf") <= termination_threshold(cfg)


# -- Algorithm -------------------------------------------------------------------


def _scalings(A, cfg: IterationConfig):
    if cfg.tau_override is not None and (cfg.alpha0_override is not None or cfg.mode == "pade"):
        lo = hi = None
    else:
        lo, hi = linalg.eig_extremes_estimate(A)
    if cfg.mode == "pade":
        tau = cfg.tau_override if cfg.tau_override is not None else math.sqrt(lo * hi)
        return tau, 1.0
    tau = cfg.tau_override if cfg.tau_override is not None else hi
    if cfg.alpha0_override is not None:
        alpha0 = cfg.alpha0_override
    else:
        alpha0 = min(1.0, (lo / hi) ** (1.0 / cfg.p))
    if not (tau > 0 and 0 < alpha0 <= 1):
        raise DomainError("need tau > 0 and alpha0 in (0, 1]")
    return tau, alpha0


def _rescale(alpha, p):
    s = (1 + alpha) / (2 * alpha)
    return s ** (p - 1), s


def compute_root(A, cfg: IterationConfig, callback: Callable[[IterationState], None] | None = None
                 ) -> RootResult:
    """Principal ``p``-th root and inverse root of ``A`` by the coupled iteration.

    ``callback`` (if given) sees every iterate ``(Y_k, Z_k, alpha_k)``.
    Raises DivergenceError if ``||Y||_inf`` passes 1e100 or turns non-finite.
    """
    A = linalg.as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise linalg.DimensionError("A must be square")
    n, p = A.shape[0], cfg.p
    eye = np.eye(n, dtype=complex)
    tau, alpha = _scalings(A, cfg)
    alpha0 = alpha
    mode = "pade" if cfg.mode == "pade" or alpha > cfg.alpha_pade_switch else "minimax"
    if mode == "pade":
        alpha = 1.0
    Y = A / tau
    Z = eye.copy()
    As = Y.copy()
    thr = termination_threshold(cfg)
    trace = []
    prev_residual = math.inf
    termination = "max_iters"
    k = 0
    while True:
        t0 = time.perf_counter()
        with linalg.counting() as ops:
            M = Y if k == 0 else linalg.matmul(Z, Y)
            sp1, s = _rescale(alpha, p)
            residual = linalg.norm(sp1 * s * M - eye, "inf")
            comm = None
            if cfg.monitor_commutator:
                comm = linalg.norm(M @ As - As @ M, "inf") / linalg.norm(As, "inf")
            if callback is not None:
                callback(IterationState(Y, Z, alpha, k, tau, mode))
            if prev_residual <= thr:
                termination = "converged"
            if termination == "converged" or k >= cfg.max_iters:
                trace.append(TraceRecord(k, alpha, residual, "", time.perf_counter() - t0,
                                         commutator=comm))
                break
            hf, a_next = h_factor(cfg.m, cfg.l, p, alpha, cfg.pole_separation)
            H = apply_h(hf, M)
            Y = linalg.matmul(Y, linalg.matrix_power(H, p - 1)) if p > 2 else linalg.matmul(Y, H)
            Z = H if k == 0 else linalg.matmul(H, Z)
        trace.append(TraceRecord(k, alpha, residual, mode, time.perf_counter() - t0,
                                 ops.matmuls, ops.factorizations, comm))
        ynorm = linalg.norm(Y, "inf")
        if not np.isfinite(ynorm) or ynorm > DIVERGENCE_GUARD or not np.all(np.isfinite(Z)):
            raise DivergenceError(f"iterates diverged at step {k + 1} (||Y||_inf = {ynorm:.3e})")
        prev_residual = residual
        alpha = a_next
        if mode == "minimax" and alpha > cfg.alpha_pade_switch:
            mode, alpha = "pade", 1.0
        k += 1
    sp1, s = _rescale(alpha, p)
    Yt = tau ** (1.0 / p) * sp1 * Y
    Zt = tau ** (-1.0 / p) * s * Z
    return RootResult(
        Y_tilde=Yt,
        Z_tilde=Zt,
        iters=k,
        termination=termination,
        residual_defining=linalg.norm(np.linalg.matrix_power(Yt, p) - A, "inf") / linalg.norm(A, "inf"),
        residual_inverse_pair=linalg.norm(Zt @ Yt - eye, "inf"),
        trace=trace,
        tau=tau,
        alpha0=alpha0,
    )


def reference_relative_error(result: RootResult, A_root_reference) -> float:
    ref = linalg.as_matrix(A_root_reference)
    if ref.shape != result.Y_tilde.shape:
        raise linalg.DimensionError("reference and result shapes differ")
    return linalg.norm(result.Y_tilde - ref, "inf") / linalg.norm(ref, "inf")


# -- (1,0) and (0,1) closed forms -------------------------------------------------


def _low_order(A, p, tol, max_iters, inverse, tau=None, alpha0=None):
    A = linalg.as_matrix(A)
    n = A.shape[0]
    eye = np.eye(n, dtype=complex)
    if tau is None or alpha0 is None:
        lo, hi = linalg.eig_extremes_estimate(A)
        tau = hi if tau is None else tau
        alpha0 = min(1.0, (lo / hi) ** (1.0 / p)) if alpha0 is None else alpha0
    As = A / tau
    X = eye.copy()  # X_k for Newton, Z_k = X_k^{-1} for inverse Newton
    alpha = alpha0
    trace = []
    prev = None
    termination = "max_iters"
    k = 0
    while k < max_iters:
        if inverse:
            nu = 1.0 if alpha >= 1 else _nu(p, alpha)
            X = ((p + 1) * nu * X - linalg.matmul(linalg.matrix_power(nu * X, p + 1), As)) / p
        else:
            mu = 1.0 if alpha >= 1 else _mu(p, alpha)
            Xi = linalg.inv(mu * X)
            X = ((p - 1) * mu * X + linalg.matmul(linalg.matrix_power(Xi, p - 1), As)) / p
        if alpha < 1:
            r = rhat_01(p, alpha) if inverse else rhat_10(p, alpha)
            alpha = min(1.0, alpha / float(r(alpha**p)))
        k += 1
        s = 2 * alpha / (1 + alpha)
        cur = (X / s) if inverse else (s * X)
        if not np.all(np.isfinite(cur)) or linalg.norm(cur, "inf") > DIVERGENCE_GUARD:
            raise DivergenceError(f"iterates diverged at step {k}")
        change = math.inf if prev is None else linalg.norm(cur - prev, "inf") / linalg.norm(cur, "inf")
        trace.append(TraceRecord(k, alpha, change, "pade" if alpha >= 1 else "minimax", 0.0))
        prev = cur
        if change <= tol:
            termination = "converged"
            break
    if inverse:
        Zt = tau ** (-1.0 / p) * prev
        Yt = linalg.inv(Zt)
    else:
        Yt = tau ** (1.0 / p) * prev
        Zt = linalg.inv(Yt)
    return RootResult(
        Y_tilde=Yt,
        Z_tilde=Zt,
        iters=k,
        termination=termination,
        residual_defining=linalg.norm(np.linalg.matrix_power(Yt, p) - A, "inf") / linalg.norm(A, "inf"),
        residual_inverse_pair=linalg.norm(Zt @ Yt - eye, "inf"),
        trace=trace,
        tau=tau,
        alpha0=alpha0,
    )


def newton_scaled_root(A, p: int, tol: float = 1e-14, max_iters: int = 100, tau=None, alpha0=None):
    """Scaled Newton iteration ``X <- ((p-1) mu X + (mu X)^{1-p} A) / p``.

    Uncoupled, so rounding errors grow when the spectrum of ``A`` is widely
    spread; meant as a reference for the type-(1,0) case.
    """
    return _low_order(A, p, tol, max_iters, False, tau, alpha0)


def inverse_newton_scaled_root(A, p: int, tol: float = 1e-14, max_iters: int = 100, tau=None,
                               alpha0=None):
    """Scaled inverse Newton iteration ``Z <- ((p+1) nu Z - (nu Z)^{p+1} A) / p``.

    Uncoupled like :func:`newton_scaled_root`; a reference for type (0,1).
    """
    return _low_order(A, p, tol, max_iters, True, tau, alpha0)


# -- diagnostics -----------------------------------------------------------------


def kronecker_sum(X, p: int) -> np.ndarray:
    """``sum_{j=1}^p (X^{p-j})^T kron X^{j-1}``, the Frechet derivative of ``X -> X^p``."""
    X = linalg.as_matrix(X)
    n = X.shape[0]
    powers = [np.eye(n, dtype=complex)]
    for _ in range(p - 1):
        powers.append(powers[-1] @ X)
    S = np.zeros((n * n, n * n), dtype=complex)
    for j in range(1, p + 1):
        S += linalg.kron(powers[p - j].T, powers[j - 1])
    return S


def condition_number_kappa_p(A, X, p: int, rtol: float = 1e-12) -> float:
    """Frobenius-norm relative condition number of the ``p``-th root ``X`` of ``A``."""
    A, X = linalg.as_matrix(A), linalg.as_matrix(X)
    S = kronecker_sum(X, p)
    lu = linalg.lu_factor(S)
    if lu.singular:
        raise SingularMatrixError("Kronecker sum is singular")

    def apply(x):
        # (S^H S)^{-1} x
        return linalg.lu_solve(lu, linalg.lu_solve(lu, x, trans=2))

    apply.n = S.shape[0]
    inv_norm = linalg._two_norm_est(None, rtol=rtol, maxiter=1000, apply=apply)
    return linalg.norm(A, "fro") / linalg.norm(X, "fro") * inv_norm


class FrechetCheck(NamedTuple):
    idempotency: float  # from finite differences
    agreement: float  # closed form vs finite differences
    closed_form_idempotency: float


def frechet_closed_form(B, E, F, p: int):
    B = linalg.as_matrix(B)
    Binv = linalg.inv(B)
    return ((E - (p - 1) * B @ F @ B) / p, ((p - 1) * F - Binv @ E @ Binv) / p)


def pade_step_map(Y, Z, m: int, l: int, p: int):
    """One Pade step ``g(Y, Z) = (Y Q(ZY)^{p-1}, Q(ZY) Z)`` with ``Q = 1/P``."""
    H = apply_h(HFactor(pade_coeffs(m, l, p).reciprocal(), None), Z @ Y)
    return Y @ np.linalg.matrix_power(H, p - 1), H @ Z


def frechet_idempotency_defect(B, m: int, l: int, p: int, h_fd: float | None = None,
                               n_dirs: int = 6, rng=None) -> FrechetCheck:
    """Idempotency of the Frechet derivative of the Pade step at ``(B, B^{-1})``.

    The derivative is formed by central differences along ``n_dirs`` random
    direction pairs ``(E, F)`` and compared with the closed form.
    """
    B = linalg.as_matrix(B)
    Binv = linalg.inv(B)
    h = 1e-6 * linalg.norm(B, "inf") if h_fd is None else h_fd
    rng = np.random.default_rng(rng)
    n = B.shape[0]

    def fd(E, F):
        gp = pade_step_map(B + h * E, Binv + h * F, m, l, p)
        gm = pade_step_map(B - h * E, Binv - h * F, m, l, p)
        return ((gp[0] - gm[0]) / (2 * h), (gp[1] - gm[1]) / (2 * h))

    def size(E, F):
        return max(linalg.norm(E, "inf"), linalg.norm(F, "inf"))

    idem = agree = closed = 0.0
    for _ in range(n_dirs):
        E = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        F = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
        nrm = size(E, F)
        E1, F1 = fd(E, F)
        E2, F2 = fd(E1, F1)
        idem = max(idem, size(E2 - E1, F2 - F1) / nrm)
        Ea, Fa = frechet_closed_form(B, E, F, p)
        agree = max(agree, size(Ea - E1, Fa - F1) / nrm)
        Eb, Fb = frechet_closed_form(B, Ea, Fa, p)
        closed = max(closed, size(Eb - Ea, Fb - Fa) / nrm)
    return FrechetCheck(idem, agree, closed)
