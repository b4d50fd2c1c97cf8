"""Real polynomials, rational functions, Pade approximants of z**(1/p) and
partial-fraction expansions.

Coefficients are stored in ascending monomial order.  Rational functions are
kept in the canonical normalization ``den(1) == 1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from math import comb

import numpy as np
from numpy.polynomial import polynomial as npoly

from .errors import CapacityError, DegenerateError, MultiplePoleError, PoleError

POLE_THRESHOLD = 1e-300
# minimum relative distance between denominator roots for a simple-pole expansion
ROOT_SEPARATION = 1e-8
PADE_MAX_ORDER = 200


def _trim(coeffs):
    c = np.atleast_1d(np.asarray(coeffs, dtype=float)).copy()
    nz = np.flatnonzero(c)
    if nz.size == 0:
        return np.zeros(1)
    return c[: nz[-1] + 1]


@dataclass(frozen=True, eq=False)
class Polynomial:
    """Polynomial with real coefficients ``coeffs[k] * z**k``."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = _trim(self.coeffs)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def degree(self) -> int:
        if self.coeffs.size == 1 and self.coeffs[0] == 0:
            return -1
        return self.coeffs.size - 1

    @property
    def is_zero(self) -> bool:
        return self.degree == -1

    def __call__(self, z):
        return eval_poly(self, z)

    def __eq__(self, other):
        if not isinstance(other, Polynomial):
            return NotImplemented
        return np.array_equal(self.coeffs, other.coeffs)

    def __repr__(self):
        return f"Polynomial({self.coeffs.tolist()})"


@dataclass(frozen=True, eq=False)
class RationalFunction:
    """``num(z) / den(z)`` of declared type ``(type_m, type_l)``."""

    num: Polynomial
    den: Polynomial
    type_m: int
    type_l: int

    def __post_init__(self):
        if self.den.is_zero:
            raise DegenerateError("denominator is the zero polynomial")
        if self.num.degree > self.type_m or self.den.degree > self.type_l:
            raise DegenerateError(
                f"degrees ({self.num.degree},{self.den.degree}) exceed type "
                f"({self.type_m},{self.type_l})"
            )

    @classmethod
    def from_coeffs(cls, num, den, type_m=None, type_l=None, normalize=True):
        """Build from coefficient sequences; normalizes to ``den(1) = 1``."""
        num = np.asarray(num, dtype=float)
        den = np.asarray(den, dtype=float)
        if normalize:
            d1 = den.sum()
            if d1 == 0:
                raise DegenerateError("den(1) = 0, cannot normalize")
            num, den = num / d1, den / d1
        P, Q = Polynomial(num), Polynomial(den)
        m = max(P.degree, 0) if type_m is None else type_m
        l = max(Q.degree, 0) if type_l is None else type_l
        return cls(P, Q, m, l)

    def __call__(self, z):
        return eval_rational(self, z)

    def scaled(self, c: float) -> "RationalFunction":
        """Return ``c * r``."""
        return RationalFunction(Polynomial(c * self.num.coeffs), self.den, self.type_m, self.type_l)

    def reciprocal(self) -> "RationalFunction":
        """Return ``1 / r`` (type swapped), renormalized so that den(1) = 1."""
        if self.num.is_zero:
            raise DegenerateError("reciprocal of the zero function")
        return RationalFunction.from_coeffs(
            self.den.coeffs, self.num.coeffs, self.type_l, self.type_m
        )

    def __repr__(self):
        return (
            f"RationalFunction(num={self.num.coeffs.tolist()}, "
            f"den={self.den.coeffs.tolist()}, type=({self.type_m},{self.type_l}))"
        )


@dataclass(frozen=True)
class PartialFractions:
    """``a0 + sum_j residues[j] / (z + shifts[j])``."""

    a0: complex
    residues: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))
    shifts: np.ndarray = field(default_factory=lambda: np.zeros(0, complex))

    @property
    def terms(self):
        return list(zip(self.residues, self.shifts))

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.full(z.shape, self.a0, dtype=complex)
        for a, b in zip(self.residues, self.shifts):
            out = out + a / (z + b)
        return out if out.ndim else complex(out)


def eval_poly(poly: Polynomial, z):
    """Horner evaluation; ``z`` may be a scalar or an array."""
    c = poly.coeffs
    z = np.asarray(z)
    acc = np.full(z.shape, c[-1], dtype=np.result_type(z, c))
    for ck in c[-2::-1]:
        acc = acc * z + ck
    return acc if acc.ndim else acc.item()


def eval_rational(r: RationalFunction, z):
    """Evaluate ``num(z) / den(z)``; raises PoleError if ``|den(z)| < 1e-300``."""
    d = np.asarray(eval_poly(r.den, z))
    if np.any(np.abs(d) < POLE_THRESHOLD):
        raise PoleError("rational function evaluated at a pole")
    out = np.asarray(eval_poly(r.num, z)) / d
    return out if out.ndim else out.item()


def derivative(poly: Polynomial) -> Polynomial:
    c = poly.coeffs
    if c.size == 1:
        return Polynomial([0.0])
    return Polynomial(c[1:] * np.arange(1, c.size))


def pochhammer(beta, m: int):
    """Rising factorial ``beta (beta+1) ... (beta+m-1)``; exact for Fraction input."""
    out = 1 if isinstance(beta, (int, Fraction)) else 1.0
    for i in range(m):
        out *= beta + i
    return out


def _one_minus_z_powers(j: int):
    # (1 - z)^j in ascending monomial coefficients
    return [Fraction(comb(j, k) * (-1) ** k) for k in range(j + 1)]


def pade_coeffs_exact(m: int, l: int, p: int):
    """Exact monomial coefficients ``(num, den)`` of the type-(m, l) Pade
    approximant of ``z**(1/p)`` about ``z = 1`` as lists of Fractions."""
    if m < 0 or l < 0 or p < 1:
        raise ValueError("need m, l >= 0 and p >= 1")
    if m + l > PADE_MAX_ORDER:
        raise CapacityError(f"m + l = {m + l} exceeds supported order {PADE_MAX_ORDER}")
    s = Fraction(1, p)
    num_w = [
        pochhammer(Fraction(-m), j) * pochhammer(-s - l, j)
        / (Fraction(_factorial(j)) * pochhammer(Fraction(-l - m), j))
        for j in range(m + 1)
    ]
    den_w = [
        pochhammer(s, j) * pochhammer(s - m, m) * pochhammer(Fraction(j - l - m), m)
        / (_factorial(j) * pochhammer(Fraction(-l - m), m) * pochhammer(j + s - m, m))
        for j in range(l + 1)
    ]
    return _expand(num_w), _expand(den_w)


def _factorial(n):
    out = 1
    for i in range(2, n + 1):
        out *= i
    return out


def _expand(weights):
    out = [Fraction(0)] * len(weights)
    for j, w in enumerate(weights):
        if w == 0:
            continue
        for k, c in enumerate(_one_minus_z_powers(j)):
            out[k] += w * c
    return out


def pade_coeffs(m: int, l: int, p: int) -> RationalFunction:
    """Type-(m, l) Pade approximant ``P_{m,l,p}`` of ``z**(1/p)`` at ``z = 1``.

    The expansion from powers of ``(1 - z)`` is carried out in exact rational
    arithmetic and rounded once, so ``P(1) = 1`` holds to the last bit.
    """
    num, den = pade_coeffs_exact(m, l, p)
    d1 = sum(den)
    return RationalFunction.from_coeffs(
        [float(c / d1) for c in num], [float(c / d1) for c in den], m, l, normalize=False
    )


def poly_roots(poly: Polynomial) -> np.ndarray:
    """All complex roots (with multiplicity) via companion-matrix eigenvalues."""
    if poly.degree < 1:
        raise DegenerateError("roots of a zero or constant polynomial")
    return npoly.polyroots(poly.coeffs).astype(complex)


def to_partial_fractions(h: RationalFunction, roots=None, separation=ROOT_SEPARATION):
    """Expand ``h = num/den`` with ``deg num <= deg den`` into simple poles.

    ``roots`` optionally supplies the denominator roots (e.g. computed in
    extended precision); otherwise they come from :func:`poly_roots`.
    Raises MultiplePoleError if two poles are closer than ``separation``
    times the larger of their magnitudes; callers then fall back to direct
    evaluation.
    """
    nd, dd = h.num.degree, h.den.degree
    if nd > dd:
        raise DegenerateError("numerator degree exceeds denominator degree")
    if dd == 0:
        return PartialFractions(complex(h.num.coeffs[0] / h.den.coeffs[0]))
    a0 = h.num.coeffs[-1] / h.den.coeffs[-1] if nd == dd else 0.0
    z = poly_roots(h.den) if roots is None else np.asarray(roots, dtype=complex)
    if z.size != dd:
        raise DegenerateError(f"expected {dd} roots, got {z.size}")
    if dd > 1:
        # pairwise relative gap: poles of minimax factors span many decades
        mag = np.abs(z)
        scale = np.maximum(mag[:, None], mag[None, :])
        gaps = np.abs(z[:, None] - z[None, :])
        np.fill_diagonal(gaps, np.inf)
        if np.any(gaps <= separation * scale):
            raise MultiplePoleError("denominator has (nearly) repeated roots")
    dprime = derivative(h.den)
    res = np.asarray(eval_poly(h.num, z), dtype=complex) / np.asarray(eval_poly(dprime, z), dtype=complex)
    return PartialFractions(complex(a0), res, -z)
