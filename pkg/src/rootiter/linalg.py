"""Dense complex linear algebra used by the matrix iterations.

Matrices are plain ``numpy`` complex arrays.  Products and solves go through
:func:`matmul` and :func:`lu_solve` so an :class:`OpCounter` can tally them.
"""

from __future__ import annotations

import contextlib
import math
import warnings
from dataclasses import dataclass

import mpmath
import numpy as np
import scipy.linalg

from .errors import (CapacityError, DimensionError, DomainError, MatrixMarketError,
                     SingularMatrixError)

PIVOT_THRESHOLD = 1e-300
KRON_MAX_DIM = 4096


def as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=complex)
    if A.ndim != 2 or min(A.shape) < 1:
        raise DimensionError(f"expected a nonempty 2-D array, got shape {A.shape}")
    return A


def _square(A):
    A = as_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {A.shape}")
    return A


class OpCounter:
    """Tally of n-by-n matrix multiplies and LU factorizations/solves."""

    def __init__(self):
        self.matmuls = 0
        self.factorizations = 0
        self.solves = 0  # right-hand-side blocks solved against a factorization

    def snapshot(self):
        return (self.matmuls, self.factorizations, self.solves)


_active: list[OpCounter] = []


@contextlib.contextmanager
def counting():
    """Count operations performed inside the block."""
    c = OpCounter()
    _active.append(c)
    try:
        yield c
    finally:
        _active.remove(c)


def _tally(attr):
    for c in _active:
        setattr(c, attr, getattr(c, attr) + 1)


def matmul(A, B) -> np.ndarray:
    A, B = as_matrix(A), as_matrix(B)
    if A.shape[1] != B.shape[0]:
        raise DimensionError(f"inner dimensions differ: {A.shape} x {B.shape}")
    _tally("matmuls")
    return A @ B


@dataclass(frozen=True, eq=False)
class LUFactors:
    lu: np.ndarray
    piv: np.ndarray
    singular: bool

    @property
    def n(self):
        return self.lu.shape[0]


def lu_factor(A) -> LUFactors:
    """Partial-pivoting LU (LAPACK getrf)."""
    A = _square(A)
    _tally("factorizations")
    with np.errstate(all="ignore"), warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    singular = bool(np.any(diag < PIVOT_THRESHOLD) or not np.all(np.isfinite(diag)))
    return LUFactors(lu, piv, singular)


def lu_solve(lu: LUFactors, B, refine_with=None, trans: int = 0) -> np.ndarray:
    """Solve ``A X = B`` from the factors of ``A``.

    ``trans=2`` solves with the conjugate transpose instead.  Passing the
    original matrix as ``refine_with`` adds one step of iterative refinement
    (plain solves only).
    """
    if lu.singular:
        raise SingularMatrixError("matrix is singular to working precision")
    B = np.asarray(B, dtype=complex)
    if B.shape[0] != lu.n:
        raise DimensionError(f"right-hand side has {B.shape[0]} rows, expected {lu.n}")
    _tally("solves")
    X = scipy.linalg.lu_solve((lu.lu, lu.piv), B, trans=trans, check_finite=False)
    if refine_with is not None and trans == 0:
        R = B - np.asarray(refine_with) @ X
        X = X + scipy.linalg.lu_solve((lu.lu, lu.piv), R, check_finite=False)
    return X


def solve(A, B) -> np.ndarray:
    return lu_solve(lu_factor(A), B)


def inv(A) -> np.ndarray:
    A = _square(A)
    return lu_solve(lu_factor(A), np.eye(A.shape[0], dtype=complex))


def matrix_power(A, e: int) -> np.ndarray:
    """``A**e`` for ``e >= 0`` by binary powering (squarings plus one multiply per set bit)."""
    A = _square(A)
    if e < 0:
        raise ValueError("negative exponent")
    result = None
    base = A
    while e:
        if e & 1:
            result = base if result is None else matmul(result, base)
        e >>= 1
        if e:
            base = matmul(base, base)
    return np.eye(A.shape[0], dtype=complex) if result is None else result


def norm(A, which: str = "inf") -> float:
    """``inf`` (max row sum), ``fro``, or ``two_est`` (power iteration on A^H A)."""
    A = as_matrix(A)
    if which == "inf":
        return float(np.max(np.sum(np.abs(A), axis=1)))
    if which == "fro":
        return float(np.sqrt(np.sum(np.abs(A) ** 2)))
    if which == "two_est":
        return _two_norm_est(A)
    raise ValueError(f"unknown norm {which!r}")


def _two_norm_est(A, rtol=1e-6, maxiter=200, apply=None, seed=0):
    rng = np.random.default_rng(seed)
    n = A.shape[1] if A is not None else apply.n
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    est = 0.0
    for _ in range(maxiter):
        if apply is None:
            y = A.conj().T @ (A @ x)
        else:
            y = apply(x)
        lam = float(np.linalg.norm(y))
        if lam == 0:
            return 0.0
        x = y / lam
        if abs(lam - est) <= rtol * lam:
            est = lam
            break
        est = lam
    return math.sqrt(est)


def _spectral_radius_est(apply, n, iters=200, seed=1):
    """Geometric mean of growth factors over the second half of a power run."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)
    logs = []
    for k in range(iters):
        y = apply(x)
        g = np.linalg.norm(y)
        if g == 0 or not np.isfinite(g):
            return float(g)
        logs.append(math.log(g))
        x = y / g
        if k >= 20 and k % 10 == 0:
            tail = logs[len(logs) // 2:]
            if max(tail) - min(tail) < 1e-12:
                break
    tail = logs[len(logs) // 2:]
    return math.exp(sum(tail) / len(tail))


def eig_extremes_estimate(A, iters: int = 200):
    """Estimates of the smallest and largest eigenvalue magnitudes of ``A``.

    The largest comes from power iteration on ``A``, the smallest from power
    iteration on ``A^{-1}`` through one LU factorization.
    """
    A = _square(A)
    n = A.shape[0]
    lu = lu_factor(A)
    if lu.singular:
        raise SingularMatrixError("matrix is singular")
    hi = _spectral_radius_est(lambda x: A @ x, n, iters)
    inv_rho = _spectral_radius_est(
        lambda x: scipy.linalg.lu_solve((lu.lu, lu.piv), x, check_finite=False), n, iters
    )
    return 1.0 / inv_rho, hi


def kron(A, B) -> np.ndarray:
    A, B = as_matrix(A), as_matrix(B)
    if A.shape[0] * B.shape[0] > KRON_MAX_DIM or A.shape[1] * B.shape[1] > KRON_MAX_DIM:
        raise CapacityError("Kronecker product larger than 4096 x 4096")
    return np.kron(A, B)


# -- test matrices --------------------------------------------------------------


def random_unitary(n, rng):
    Z = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def _conditioned(n, cond, rng):
    s = np.geomspace(1.0, cond, n) if n > 1 else np.ones(1)
    return random_unitary(n, rng) @ np.diag(s) @ random_unitary(n, rng)


def _root_derivatives(lam, p, k):
    # f^{(j)}(lam) / j! for f(z) = z**(1/p), principal branch
    out = []
    c = 1.0
    base = complex(lam) ** (1.0 / p)
    for j in range(k):
        out.append(c * base * complex(lam) ** (-j))
        c *= (1.0 / p - j) / (j + 1)
    return out


def _jordan_root(lams, p):
    n = len(lams)
    J = np.diag(np.asarray(lams, dtype=complex))
    R = np.zeros((n, n), dtype=complex)
    i = 0
    while i < n:
        j = i
        while j + 1 < n and lams[j + 1] == lams[i]:
            J[j, j + 1] = 1.0
            j += 1
        size = j - i + 1
        coef = _root_derivatives(lams[i], p, size)
        for a in range(size):
            for b in range(a, size):
                R[i + a, i + b] = coef[b - a]
        i = j + 1
    return J, R


def root_reference(A, p: int, dps: int = 50, hermitian: bool | None = None) -> np.ndarray:
    """Principal ``p``-th root of the stored matrix ``A`` via an extended-precision
    eigendecomposition, rounded to double.

    Reliable as long as the eigenvector condition number stays well below
    ``10**(dps - 16)``.
    """
    A = _square(A)
    if hermitian is None:
        hermitian = bool(np.array_equal(A, A.conj().T))
    with mpmath.workdps(dps):
        M = mpmath.matrix(A.tolist())
        if hermitian:
            lam, V = mpmath.eighe(M)
            Vinv = V.transpose_conj()
        else:
            lam, V = mpmath.eig(M)
            Vinv = mpmath.inverse(V)
        if any(mpmath.im(x) == 0 and mpmath.re(x) <= 0 for x in lam):
            raise DomainError("matrix has an eigenvalue on the closed negative real axis")
        D = mpmath.diag([mpmath.root(x, p) for x in lam])
        X = V * D * Vinv
        return np.array([[complex(X[i, j]) for j in range(X.cols)] for i in range(X.rows)])


def build_test_matrix(kind: str, spectrum, conditioning: float = 1.0, p: int = 2, rng=None,
                      reference: str = "extended"):
    """Matrix with a prescribed spectrum and its principal ``p``-th root.

    ``hermitian_pd`` uses a random unitary eigenbasis; ``diagonalizable`` an
    eigenbasis with 2-norm condition number ``conditioning``; ``jordan_like``
    additionally joins runs of equal consecutive eigenvalues into Jordan
    blocks.  Returns ``(A, A**(1/p))``.

    Rounding ``A`` to double moves small eigenvalues by about ``u ||A||``, so
    by default the root is recomputed from the stored ``A`` in extended
    precision; ``reference="analytic"`` returns ``V f(J) V^{-1}`` instead.
    """
    lam = np.asarray(spectrum, dtype=complex)
    if np.any((lam.imag == 0) & (lam.real <= 0)):
        raise DomainError("spectrum touches the closed negative real axis")
    rng = np.random.default_rng(rng)
    n = lam.size
    if kind == "hermitian_pd":
        if np.any(lam.imag != 0) or np.any(lam.real <= 0):
            raise DomainError("hermitian_pd needs a positive real spectrum")
        Q = random_unitary(n, rng)
        A = (Q * lam.real) @ Q.conj().T
        X = (Q * lam.real ** (1.0 / p)) @ Q.conj().T
        A, X = (A + A.conj().T) / 2, (X + X.conj().T) / 2
    else:
        if kind == "diagonalizable":
            J, R = np.diag(lam), np.diag(lam ** (1.0 / p))
        elif kind == "jordan_like":
            J, R = _jordan_root(list(lam), p)
        else:
            raise ValueError(f"unknown kind {kind!r}")
        V = _conditioned(n, conditioning, rng)
        Vinv = np.linalg.inv(V)
        A, X = V @ J @ Vinv, V @ R @ Vinv
    if reference == "extended":
        X = root_reference(A, p, hermitian=(kind == "hermitian_pd"))
    elif reference != "analytic":
        raise ValueError(f"unknown reference {reference!r}")
    return A, X


# -- Matrix Market (array format) -------------------------------------------------

MM_HEADER = "%%MatrixMarket matrix array complex general"


def write_matrix_market(A, dest) -> None:
    """Write ``A`` in array format, column-major, 17 significant digits."""
    A = as_matrix(A)
    lines = [MM_HEADER, f"{A.shape[0]} {A.shape[1]}"]
    for x in A.T.ravel():
        lines.append(f"{x.real:.16e} {x.imag:.16e}")
    text = "\n".join(lines) + "\n"
    if hasattr(dest, "write"):
        dest.write(text)
    else:
        with open(dest, "w") as fh:
            fh.write(text)


def parse_matrix_market(text: str) -> np.ndarray:
    """Parse array-format Matrix Market text (``complex`` or ``real`` general)."""
    lines = text.splitlines()
    if not lines:
        raise MatrixMarketError("empty input", line=1)
    head = lines[0].split()
    if len(head) != 5 or head[0] != "%%MatrixMarket":
        raise MatrixMarketError("missing %%MatrixMarket header", line=1)
    obj, fmt, fieldname, sym = (h.lower() for h in head[1:])
    if obj != "matrix" or fmt != "array":
        raise MatrixMarketError("only 'matrix array' files are supported", line=1)
    if fieldname not in ("complex", "real", "double") or sym != "general":
        raise MatrixMarketError(f"unsupported field/symmetry '{fieldname} {sym}'", line=1)
    width = 2 if fieldname == "complex" else 1
    body = [(i + 1, ln.split()) for i, ln in enumerate(lines) if i > 0 and ln.strip()
            and not ln.lstrip().startswith("%")]
    if not body:
        raise MatrixMarketError("missing dimension line", line=len(lines))
    lineno, dims = body[0]
    try:
        nr, nc = (int(d) for d in dims)
    except ValueError:
        raise MatrixMarketError("dimension line must hold two integers", line=lineno) from None
    if nr < 1 or nc < 1:
        raise MatrixMarketError("dimensions must be positive", line=lineno)
    entries = body[1:]
    if len(entries) != nr * nc:
        where = entries[nr * nc][0] if len(entries) > nr * nc else len(lines)
        raise MatrixMarketError(f"expected {nr * nc} entries, found {len(entries)}", line=where)
    vals = np.empty(nr * nc, dtype=complex)
    for idx, (lineno, parts) in enumerate(entries):
        if len(parts) != width:
            raise MatrixMarketError(f"expected {width} numbers per entry", line=lineno)
        try:
            nums = [float(v) for v in parts]
        except ValueError:
            raise MatrixMarketError(f"not a number: {' '.join(parts)!r}", line=lineno) from None
        vals[idx] = complex(nums[0], nums[1] if width == 2 else 0.0)
    return vals.reshape(nc, nr).T.copy()


def read_matrix_market(src) -> np.ndarray:
    if hasattr(src, "read"):
        return parse_matrix_market(src.read())
    with open(src) as fh:
        return parse_matrix_market(fh.read())
