"""Best relative-error rational approximants of z**(1/p) on [alpha**p, 1].

The solver is a rational Remez exchange carried out in extended precision
(mpmath).  Reference points are parametrized by ``t = z**(1/p)`` so the
error ``r(t**p)/t - 1`` never needs a root evaluation; the returned rational
function is always a function of ``z``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath
import numpy as np

from .errors import ConvergenceError, DegenerateError, DomainError
from .polyrat import Polynomial, RationalFunction, _factorial, pochhammer

# l == m problems with alpha**p below this are solved in the reflected variable
REFLECT_BELOW = 1e-8
SAMPLES_PER_SEGMENT = 12


@dataclass(frozen=True)
class ApproxProblem:
    m: int
    l: int
    p: int
    alpha: float
    rel_tol: float = 1e-13
    max_remez_iters: int = 60

    def __post_init__(self):
        if self.m < 0 or self.l < 0:
            raise DomainError("m and l must be nonnegative")
        if self.p < 2:
            raise DomainError("p must be >= 2")


@dataclass(frozen=True, eq=False)
class MinimaxResult:
    """Solved approximant with its levelled error and alternation set.

    ``num_mp``/``den_mp`` hold the extended-precision coefficients the float
    ``r`` was rounded from; ``E_mp`` is the levelled error at that precision.
    """

    r: RationalFunction
    E: float
    nodes: np.ndarray
    sign0: int
    remez_iters: int
    certified_lower: float
    problem: ApproxProblem
    num_mp: tuple = field(repr=False, default=())
    den_mp: tuple = field(repr=False, default=())
    E_mp: object = field(repr=False, default=None)
    dps: int = field(repr=False, default=0)

    @property
    def rhat(self) -> RationalFunction:
        return normalize_rhat(self)

    def rhat_mp(self):
        """Extended-precision ``(num, den)`` coefficients of ``r / (1 - E)``."""
        with mpmath.workdps(self.dps):
            s = 1 / (1 - self.E_mp)
            return tuple(c * s for c in self.num_mp), tuple(self.den_mp)

    def zeros(self) -> np.ndarray:
        """Zeros of the numerator (poles of ``1/r``), computed in extended precision."""
        return _mp_roots(self.num_mp, self.dps)


def _mp_roots(coeffs, dps):
    c = list(coeffs)
    while len(c) > 1 and c[-1] == 0:
        c.pop()
    if len(c) < 2:
        return np.zeros(0, dtype=complex)
    with mpmath.workdps(dps):
        roots = mpmath.polyroots(c[::-1], maxsteps=400, extraprec=4 * dps)
    return np.array([complex(z) for z in roots])


# -- closed forms --------------------------------------------------------------


def alpha_next(alpha: float, E: float) -> float:
    """Next scaling parameter ``(1 - E) / (1 + E)``."""
    if not 0 <= E < 1:
        raise DomainError("E must lie in [0, 1)")
    return (1 - E) / (1 + E)


def _one_minus_pow(alpha, n):
    # 1 - alpha**n without cancellation near alpha = 1
    return -math.expm1(n * math.log1p(-(1 - alpha)))


def _mu(p, alpha):
    return (alpha * _one_minus_pow(alpha, p - 1) / ((p - 1) * (1 - alpha))) ** (1 / p)


def _nu(p, alpha):
    return ((p + 1) * (1 - alpha) / _one_minus_pow(alpha, p + 1)) ** (1 / p)


def rhat_10(p: int, alpha: float) -> RationalFunction:
    """Normalized type-(1,0) approximant: a scaled Newton step."""
    _check_alpha(alpha)
    mu = _mu(p, alpha)
    return RationalFunction.from_coeffs([(p - 1) * mu / p, 1 / (p * mu ** (p - 1))], [1.0], 1, 0)


def rhat_01(p: int, alpha: float) -> RationalFunction:
    """Normalized type-(0,1) approximant: a scaled inverse Newton step."""
    _check_alpha(alpha)
    nu = _nu(p, alpha)
    return RationalFunction.from_coeffs([p], [(p + 1) * nu, -(nu ** (p + 1))], 0, 1)


def _exact_pade_defect(m, l, p):
    s = Fraction(1, p)
    n = m + l
    mag = (
        _factorial(m) * _factorial(l) * pochhammer(s, l + 1) * pochhammer(1 - s, m)
        / (_factorial(n + 1) * _factorial(n))
    )
    return (-1) ** (n + 1) * mag


def pade_error_coeff(m: int, l: int, p: int) -> float:
    """Leading coefficient c_f of ``(z-1)**(m+l+1)`` in ``P_{m,l,p}(z) - z**(1/p)``."""
    return float(_exact_pade_defect(m, l, p))


def asymptotic_C_exact(m: int, l: int, p: int) -> Fraction:
    if (m, l) == (0, 0):
        raise DomainError("(m, l) = (0, 0) has no contraction constant")
    n = m + l
    return abs(_exact_pade_defect(m, l, p)) * Fraction(p) ** (n + 1) / 2**n


def asymptotic_C(m: int, l: int, p: int) -> float:
    """Contraction constant with ``eps_{k+1} ~ C * eps_k**(m+l+1)``."""
    return float(asymptotic_C_exact(m, l, p))


# -- Remez solver --------------------------------------------------------------


def _check_alpha(alpha):
    if not 0 < alpha < 1:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha!r}")


def _choose_dps(m, l, p, alpha):
    n = m + l
    a = alpha**p
    width = max(1 - a, 1e-300)
    narrow = math.log10(1 / width)
    wide = math.log10(1 / a)
    # conditioning of the monomial basis plus the digits eaten by E itself
    return int(30 + (2 * n + 1) * narrow + n * wide / 3)


def _horner2(c, z):
    v = c[-1]
    d = 0
    for ck in c[-2::-1]:
        d = d * z + v
        v = v * z + ck
    return v, d


class _Remez:
    """Levelled-system solves and exchanges in the variable ``t``.

    Internally the basis variable is ``y = t**p`` and the target is
    ``scale * t**sigma``; ``(scale, sigma) = (1, 1)`` is the direct problem,
    ``(alpha, -1)`` the reflected one.
    """

    def __init__(self, m, l, p, alpha, sigma, dps):
        self.m, self.l, self.p, self.sigma = m, l, p, sigma
        self.dps = dps
        self.tlo = mpmath.mpf(alpha)
        self.thi = mpmath.mpf(1)
        self.scale = mpmath.mpf(1) if sigma == 1 else mpmath.mpf(alpha)
        self.N = m + l + 2
        self.sol = None

    def target(self, t):
        return self.scale * (t if self.sigma == 1 else 1 / t)

    def err(self, t, deriv=False):
        P, Q, _ = self.sol
        p = self.p
        y = t**p
        Pv, Pd = _horner2(P, y)
        Qv, Qd = _horner2(Q, y)
        g = Pv / Qv
        f = self.target(t)
        e = g / f - 1
        if not deriv:
            return e
        gy = (Pd * Qv - Pv * Qd) / Qv**2
        # d/dt (g/f) with f = scale * t**sigma
        de = gy * p * t ** (p - 1) / f - self.sigma * g / (f * t)
        return e, de

    def initial_reference(self):
        L = mpmath.log(self.thi / self.tlo)
        N = self.N
        return [
            self.tlo * mpmath.exp(L * (1 - mpmath.cos(mpmath.pi * i / (N - 1))) / 2)
            for i in range(N)
        ]

    def solve_levelled(self, ref):
        m, l, p = self.m, self.l, self.p
        N = self.N
        nunk = m + l + 3
        ys = [t**p for t in ref]
        fs = [self.target(t) for t in ref]
        sgn = [(-1) ** i for i in range(N)]
        if self.sol is None:
            P, Q, lam = None, [mpmath.mpf(1)] + [mpmath.mpf(0)] * l, mpmath.mpf(0)
        else:
            P, Q, lam = self.sol
        tol = mpmath.mpf(10) ** (-(self.dps - 10))
        deg = max(m, l)
        pws = []
        for y in ys:
            row = [mpmath.mpf(1)]
            for _ in range(deg):
                row.append(row[-1] * y)
            pws.append(row)
        prev_step = mpmath.inf
        for it in range(80):
            # two linearized passes (lambda * Q_prev), then Newton on the exact system
            newton = P is not None and it >= 2
            J = mpmath.matrix(nunk, nunk)
            F = mpmath.matrix(nunk, 1)
            for i in range(N):
                pw, fi = pws[i], fs[i]
                Qi = mpmath.fsum(Q[j] * pw[j] for j in range(l + 1))
                for k in range(m + 1):
                    J[i, k] = pw[k] / fi
                c = (1 + sgn[i] * lam) if newton else 1
                for j in range(l + 1):
                    J[i, m + 1 + j] = -c * pw[j]
                J[i, nunk - 1] = -sgn[i] * Qi
                if newton:
                    Pi = mpmath.fsum(P[k] * pw[k] for k in range(m + 1))
                    F[i] = Pi / fi - c * Qi
            for j in range(l + 1):
                J[N, m + 1 + j] = 1
            try:
                if newton:
                    F[N] = mpmath.fsum(Q) - 1
                    dx = mpmath.lu_solve(J, -F)
                    P = [P[k] + dx[k] for k in range(m + 1)]
                    Q = [Q[j] + dx[m + 1 + j] for j in range(l + 1)]
                    lam = lam + dx[nunk - 1]
                    size = max(max(abs(v) for v in P), max(abs(v) for v in Q), abs(lam))
                    step = max(abs(v) for v in dx) / size
                else:
                    F[N] = 1
                    x = mpmath.lu_solve(J, F)
                    Qn = [x[m + 1 + j] for j in range(l + 1)]
                    step = max(abs(a - b) for a, b in zip(Qn, Q)) / max(abs(v) for v in Qn)
                    P, Q, lam = [x[k] for k in range(m + 1)], Qn, x[nunk - 1]
            except ZeroDivisionError as exc:
                raise ConvergenceError("levelled system is numerically singular") from exc
            if it >= 2 and step < tol:
                break
            # quadratic convergence has hit the working-precision floor
            if newton and it >= 4 and step > prev_step / 4 and prev_step < tol**0.5:
                break
            prev_step = step
        self.sol = (P, Q, lam)
        if not self._admissible(ref):
            self.solve_levelled_eig(ref)
        return self.sol

    def _admissible(self, ref):
        P, Q, lam = self.sol
        if not abs(lam) < 1 or all(c == 0 for c in P):
            return False
        return self.denominator_positive(self.sample(ref))

    def solve_levelled_eig(self, ref):
        """Levelled system as an eigenproblem in lambda.

        Rows read ``P(y_i)/f_i - (1 + s_i lam) Q(y_i) = 0``; writing them as
        ``(A + lam B) x = 0`` the candidates are ``lam = -1/mu`` for the
        eigenvalues ``mu`` of ``A^{-1} B``.  Among real candidates with
        ``|lam| < 1`` and a denominator positive on the interval, the one of
        smallest ``|lam|`` is kept.
        """
        m, l, p, N = self.m, self.l, self.p, self.N
        ys = [t**p for t in ref]
        fs = [self.target(t) for t in ref]
        A = mpmath.matrix(N, N)
        B = mpmath.matrix(N, N)
        for i in range(N):
            s = (-1) ** i
            for k in range(m + 1):
                A[i, k] = ys[i] ** k / fs[i]
            for j in range(l + 1):
                A[i, m + 1 + j] = -(ys[i] ** j)
                B[i, m + 1 + j] = -s * ys[i] ** j
        try:
            M = mpmath.inverse(A) * B
        except ZeroDivisionError as exc:
            raise ConvergenceError("levelled system is numerically singular") from exc
        mus, vecs = mpmath.eig(M)
        tiny = mpmath.mpf(10) ** (-(self.dps // 2))
        pts = self.sample(ref)
        best = None
        for idx, mu in enumerate(mus):
            if abs(mu) < tiny or abs(mpmath.im(mu)) > tiny * abs(mu):
                continue
            lam = -1 / mpmath.re(mu)
            if not abs(lam) < 1:
                continue
            x = [mpmath.re(vecs[r, idx]) for r in range(N)]
            qsum = mpmath.fsum(x[m + 1:])
            if qsum == 0:
                continue
            x = [v / qsum for v in x]
            cand = (x[: m + 1], x[m + 1:], lam)
            self.sol = cand
            if self.denominator_positive(pts) and (best is None or abs(lam) < abs(best[2])):
                best = cand
        if best is None:
            raise ConvergenceError("no admissible solution of the levelled system")
        self.sol = best
        return best

    def denominator_positive(self, pts):
        _, Q, _ = self.sol
        return all(_horner2(Q, t**self.p)[0] > 0 for t in pts)

    def _refine(self, lo, hi):
        _, dlo = self.err(lo, True)
        _, dhi = self.err(hi, True)
        if mpmath.sign(dlo) == mpmath.sign(dhi):
            return None
        a, b, fa, fb = lo, hi, dlo, dhi
        side = 0
        tol = mpmath.mpf(10) ** (-(self.dps // 2 + 5))
        c = a
        for _ in range(200):
            c = (a * fb - b * fa) / (fb - fa)
            _, fc = self.err(c, True)
            if fc == 0 or abs(b - a) < abs(c) * tol:
                break
            if mpmath.sign(fc) == mpmath.sign(fb):
                b, fb = c, fc
                if side == -1:
                    fa /= 2
                side = -1
            else:
                a, fa = c, fc
                if side == 1:
                    fb /= 2
                side = 1
        return c

    def sample(self, ref):
        pts = []
        K = SAMPLES_PER_SEGMENT
        for a, b in zip(ref[:-1], ref[1:]):
            la, lb = mpmath.log(a), mpmath.log(b)
            pts.extend(mpmath.exp(la + (lb - la) * k / K) for k in range(K))
        if ref[0] > self.tlo:
            pts.insert(0, self.tlo)
        pts.append(ref[-1])
        if ref[-1] < self.thi:
            pts.append(self.thi)
        return pts

    def extrema(self, ref):
        """Alternating local extrema of the error, one per sign run."""
        pts = self.sample(ref)
        if not self.denominator_positive(pts):
            raise ConvergenceError("spurious pole inside the approximation interval")
        vals = [self.err(t) for t in pts]
        out = []
        start = 0
        for i in range(1, len(pts) + 1):
            if i == len(pts) or mpmath.sign(vals[i]) != mpmath.sign(vals[start]):
                k = max(range(start, i), key=lambda j: abs(vals[j]))
                t = pts[k]
                if 0 < k < len(pts) - 1:
                    c = self._refine(pts[k - 1], pts[k + 1])
                    if c is not None:
                        t = c
                out.append((t, self.err(t)))
                start = i
        return out, pts, vals

    def single_exchange(self, ref, pts, vals):
        """Swap the global maximum into the reference, keeping alternation."""
        k = max(range(len(pts)), key=lambda j: abs(vals[j]))
        t, s = pts[k], mpmath.sign(vals[k])
        lam = self.sol[2]
        signs = [mpmath.sign(lam) * (-1) ** i for i in range(len(ref))]
        new = list(ref)
        pos = sum(1 for x in ref if x < t)
        if pos == 0:
            if signs[0] == s:
                new[0] = t
            else:
                new = [t] + new[:-1]
        elif pos == len(ref):
            if signs[-1] == s:
                new[-1] = t
            else:
                new = new[1:] + [t]
        else:
            j = pos - 1 if signs[pos - 1] == s else pos
            new[j] = t
        return new


def _remez_loop(solver, ref, rel_tol, max_iters):
    N = solver.N
    hi = lo = None
    for it in range(1, max_iters + 1):
        solver.solve_levelled(ref)
        ext, pts, vals = solver.extrema(ref)
        hi = max(abs(v) for v in vals + [v for _, v in ext])
        if len(ext) < N:
            ref = solver.single_exchange(ref, pts, vals)
            continue
        while len(ext) > N:
            # drop the smaller end, keeping alternation and the global max
            ext.pop(0 if abs(ext[0][1]) < abs(ext[-1][1]) else -1)
        mags = [abs(v) for _, v in ext]
        hi = max(hi, max(mags))
        lo = min(mags)
        new_ref = [t for t, _ in ext]
        if (hi - lo) / hi <= rel_tol:
            return new_ref, hi, lo, it
        moved = max(abs(a - b) for a, b in zip(new_ref, ref))
        ref = new_ref
        if moved < 1e-14 * (solver.thi - solver.tlo) and (hi - lo) / hi <= 1e-10:
            return ref, hi, lo, it
    defect = float((hi - lo) / hi) if lo is not None else None
    raise ConvergenceError(
        f"Remez did not converge in {max_iters} iterations",
        best_error=float(hi) if hi is not None else None,
        defect=defect,
    )


@lru_cache(maxsize=512)
def _solve_cached(m, l, p, alpha, rel_tol, max_iters):
    reflect = m == l and alpha**p < REFLECT_BELOW
    sigma = -1 if reflect else 1
    dps = _choose_dps(m, l, p, alpha)
    with mpmath.workdps(dps):
        solver = _Remez(m, l, p, alpha, sigma, dps)
        ref, hi, lo, it = _remez_loop(solver, solver.initial_reference(), rel_tol, max_iters)
        P, Q, lam = solver.sol
        if reflect:
            # y = alpha**p / z, so y**k -> alpha**(p k) z**(m - k)
            a = mpmath.mpf(alpha) ** p
            P = [P[m - k] * a ** (m - k) for k in range(m + 1)]
            Q = [Q[l - k] * a ** (l - k) for k in range(l + 1)]
            d1 = mpmath.fsum(Q)
            P = [c / d1 for c in P]
            Q = [c / d1 for c in Q]
            ts = [mpmath.mpf(alpha) / t for t in reversed(ref)]
            vals = list(reversed([solver.err(t) for t in ref]))
        else:
            ts = list(ref)
            vals = [solver.err(t) for t in ref]
        E_mp = hi
        nodes = np.array([float(t**p) for t in ts])
        r = RationalFunction.from_coeffs(
            [float(c) for c in P], [float(c) for c in Q], m, l, normalize=False
        )
        return dict(
            r=r,
            E=float(E_mp),
            nodes=nodes,
            sign0=int(mpmath.sign(vals[0])),
            remez_iters=it,
            certified_lower=float(lo),
            num_mp=tuple(P),
            den_mp=tuple(Q),
            E_mp=E_mp,
            dps=dps,
        )


def solve_minimax(prob: ApproxProblem) -> MinimaxResult:
    """Best type-(m, l) relative-error approximant of z**(1/p) on [alpha**p, 1].

    Results are cached on the problem parameters.
    """
    _check_alpha(prob.alpha)
    fields = _solve_cached(
        prob.m, prob.l, prob.p, float(prob.alpha), float(prob.rel_tol), int(prob.max_remez_iters)
    )
    return MinimaxResult(problem=prob, **fields)


def minimax(m, l, p, alpha, **kw) -> MinimaxResult:
    """Shorthand for ``solve_minimax(ApproxProblem(m, l, p, alpha, ...))``."""
    return solve_minimax(ApproxProblem(m, l, p, alpha, **kw))


def normalize_rhat(res: MinimaxResult) -> RationalFunction:
    """Scale ``r`` by ``1/(1 - E)`` so the minimum relative error is zero."""
    if res.E >= 1:
        raise DegenerateError("levelled error E >= 1 cannot be normalized")
    if res.E_mp is not None:
        with mpmath.workdps(res.dps):
            s = float(1 / (1 - res.E_mp))
    else:
        s = 1 / (1 - res.E)
    return res.r.scaled(s)


def relative_error(r, z, p: int):
    """``(r(z) - z**(1/p)) / z**(1/p)`` with the principal root."""
    z = np.asarray(z)
    root = np.power(z.astype(complex) if np.iscomplexobj(z) else z, 1.0 / p)
    return r(z) / root - 1


# -- equioscillation ------------------------------------------------------------


def _grid(a, b, n):
    if a > 0 and b / a > 10:
        return np.geomspace(a, b, n)
    return np.linspace(a, b, n)


def _count_alternations(vals, level_tol):
    vals = np.asarray(vals, dtype=float)
    top = np.max(np.abs(vals))
    if top == 0:
        return 0
    sel = vals[np.abs(vals) >= (1 - level_tol) * top]
    return 1 + int(np.count_nonzero(np.sign(sel[1:]) != np.sign(sel[:-1])))


def equioscillation_count(err, a: float, b: float, level_tol: float = 1e-6, expected: int = 8,
                          max_points: int = 2**22) -> int:
    """Length of the longest alternating sequence of near-extremal values.

    ``err`` is evaluated on a grid (geometric when ``b/a > 10``) of
    ``4096 * expected`` points, doubled until two consecutive counts agree.
    It must accept a numpy array.
    """
    if not a < b:
        raise ValueError("need a < b")
    n = 4096 * max(expected, 1)
    prev = _count_alternations(err(_grid(a, b, n)), level_tol)
    while 2 * n <= max_points:
        n *= 2
        cur = _count_alternations(err(_grid(a, b, n)), level_tol)
        if cur == prev:
            return cur
        prev = cur
    return prev
