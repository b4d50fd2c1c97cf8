"""Command-line entry point: ``rootiter <command> [flags]``.

Exit codes: 0 success, 1 usage or input error, 2 divergence or no
convergence, 3 solver failure.
"""

from __future__ import annotations

import argparse
import math
import re
import sys

import numpy as np

from . import linalg
from .errors import (ConvergenceError, DivergenceError, DomainError, MatrixMarketError,
                     MultiplePoleError, RootIterError, SingularMatrixError)

EXIT_OK, EXIT_USAGE, EXIT_DIVERGED, EXIT_SOLVER = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _fmt(x) -> str:
    return f"{x:.16e}"


def _fmt_c(z) -> str:
    z = complex(z)
    return _fmt(z.real) if z.imag == 0 else f"{_fmt(z.real)}{z.imag:+.16e}j"


_ANGLE = re.compile(r"^\s*([+-]?)\s*(\d*\.?\d*)\s*\*?\s*pi\s*(?:/\s*(\d+\.?\d*))?\s*$")


def _number(tok: str) -> float:
    """A float, or a multiple of pi such as ``-pi/2`` or ``0.9pi``."""
    try:
        return float(tok)
    except ValueError:
        pass
    mt = _ANGLE.match(tok.lower())
    if not mt:
        raise UsageError(f"not a number: {tok!r}")
    sign, coef, div = mt.groups()
    val = (float(coef) if coef else 1.0) * math.pi / (float(div) if div else 1.0)
    return -val if sign == "-" else val


def _rect(text: str):
    parts = text.split(",")
    if len(parts) != 4:
        raise UsageError("--rect needs lo_log10,hi_log10,lo_arg,hi_arg")
    lo, hi, alo, ahi = (_number(t) for t in parts)
    if not (lo <= hi and alo <= ahi):
        raise UsageError("--rect bounds must be increasing")
    return (lo, hi), (alo, ahi)


def _res(text: str):
    mt = re.fullmatch(r"(\d+)[xX](\d+)", text.strip())
    if not mt or int(mt.group(1)) < 1 or int(mt.group(2)) < 1:
        raise UsageError("--res must look like 800x800")
    return int(mt.group(1)), int(mt.group(2))


def _add_type_flags(sp, alpha=False, m_default=None):
    sp.add_argument("--p", type=int, required=True, help="root order p >= 2")
    sp.add_argument("--m", type=int, default=m_default, required=m_default is None,
                    help="numerator degree of the approximant")
    sp.add_argument("--l", type=int, default=None, help="denominator degree (defaults to m)")
    if alpha:
        sp.add_argument("--alpha", type=float, required=True, help="interval is [alpha**p, 1]")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rootiter", description="Rational minimax iterations for matrix p-th roots.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("root", help="compute A^(1/p) from a Matrix Market file")
    _add_type_flags(sp, m_default=8)
    sp.add_argument("--in", dest="inp", required=True, help="input matrix (Matrix Market array)")
    sp.add_argument("--out", required=True, help="output file for A^(1/p)")
    sp.add_argument("--out-inverse", help="output file for A^(-1/p)")
    sp.add_argument("--trace", help="also write the iteration trace CSV here")
    sp.add_argument("--mode", choices=("minimax", "pade"), default="minimax")
    sp.add_argument("--delta", type=float, default=1e-15, help="relative tolerance Delta")
    sp.add_argument("--max-iters", type=int, default=30)
    sp.add_argument("--tau", type=float, help="override the scaling tau")
    sp.add_argument("--alpha0", type=float, help="override the initial alpha")

    sp = sub.add_parser("minimax", help="print a best relative-error approximant")
    _add_type_flags(sp, alpha=True)

    sp = sub.add_parser("pade", help="print the Pade approximant of z^(1/p) at z=1")
    _add_type_flags(sp)

    sp = sub.add_parser("table", help="eps_k recursion and convergence ratios as CSV")
    _add_type_flags(sp)
    sp.add_argument("--eps0", type=float, required=True)
    sp.add_argument("--k", type=int, default=4, help="number of steps")

    sp = sub.add_parser("regions", help="classify a complex grid by iterations to converge")
    _add_type_flags(sp, alpha=True)
    sp.add_argument("--k", type=int, required=True, help="largest iteration count")
    sp.add_argument("--delta", type=float, default=1e-15)
    sp.add_argument("--mode", choices=("minimax", "pade"), default="minimax")
    sp.add_argument("--rect", default="-10,0,-pi,pi",
                    help="lo_log10,hi_log10,lo_arg,hi_arg (use --rect=... for negative values)")
    sp.add_argument("--res", default="800x800", help="samples as N_log10xN_arg")
    sp.add_argument("--out", required=True, help="CSV output file")

    sp = sub.add_parser("kappa", help="condition number of the p-th root")
    sp.add_argument("--p", type=int, required=True)
    sp.add_argument("--in", dest="inp", required=True)
    sp.add_argument("--root", help="precomputed root (Matrix Market); computed if omitted")
    sp.add_argument("--m", type=int, default=8)
    sp.add_argument("--mode", choices=("minimax", "pade"), default="minimax")

    sub.add_parser("selftest", help="run the acceptance checks")
    return ap


def _validate(args):
    p = getattr(args, "p", None)
    if p is not None and p < 2:
        raise UsageError("--p must be >= 2")
    m = getattr(args, "m", None)
    if m is not None:
        if getattr(args, "l", None) is None:
            args.l = m
        l = args.l
        if m < 0 or l < 0:
            raise UsageError("--m and --l must be >= 0")
        if (m, l) == (0, 0) and args.command in ("root", "table", "regions"):
            raise UsageError("(m, l) = (0, 0) does not iterate")
    if getattr(args, "alpha", None) is not None and not 0 < args.alpha < 1:
        raise UsageError("--alpha must lie in (0, 1)")
    if getattr(args, "delta", None) is not None and not args.delta > 0:
        raise UsageError("--delta must be positive")
    if getattr(args, "eps0", None) is not None and not 0 < args.eps0 < 1:
        raise UsageError("--eps0 must lie in (0, 1)")
    if getattr(args, "k", None) is not None and args.k < 0:
        raise UsageError("--k must be >= 0")
    if getattr(args, "max_iters", None) is not None and args.max_iters < 1:
        raise UsageError("--max-iters must be >= 1")
    if getattr(args, "tau", None) is not None and not args.tau > 0:
        raise UsageError("--tau must be positive")
    if getattr(args, "alpha0", None) is not None and not 0 < args.alpha0 <= 1:
        raise UsageError("--alpha0 must lie in (0, 1]")


def _print_pf(make_pf, out):
    try:
        pf = make_pf()
    except (MultiplePoleError, RootIterError) as exc:
        pf = None
        reason = str(exc)
    else:
        reason = "h is not proper"
    if pf is None:
        print(f"h partial fractions unavailable: {reason}", file=out)
        return
    print(f"h a0 {_fmt_c(pf.a0)}", file=out)
    for a, b in pf.terms:
        print(f"h term a={_fmt_c(a)} b={_fmt_c(b)}", file=out)


def cmd_root(args, out):
    from .matroot import IterationConfig, compute_root

    A = linalg.read_matrix_market(args.inp)
    if A.shape[0] != A.shape[1]:
        raise UsageError(f"matrix must be square, got {A.shape[0]}x{A.shape[1]}")
    cfg = IterationConfig(p=args.p, m=args.m, l=args.l, delta=args.delta, max_iters=args.max_iters,
                          mode=args.mode, tau_override=args.tau, alpha0_override=args.alpha0)
    res = compute_root(A, cfg)
    csv = res.trace_csv()
    out.write(csv)
    if args.trace:
        with open(args.trace, "w") as fh:
            fh.write(csv)
    linalg.write_matrix_market(res.Y_tilde, args.out)
    if args.out_inverse:
        linalg.write_matrix_market(res.Z_tilde, args.out_inverse)
    print(f"# {res.termination} after {res.iters} iterations; "
          f"||Y^p - A||/||A|| = {res.residual_defining:.3e}, ||ZY - I|| = {res.residual_inverse_pair:.3e}",
          file=sys.stderr)
    return EXIT_OK if res.termination == "converged" else EXIT_DIVERGED


def cmd_minimax(args, out):
    from .matroot import h_factor
    from .minimax import minimax

    res = minimax(args.m, args.l, args.p, args.alpha)
    print(f"type {args.m} {args.l} p {args.p} alpha {_fmt(args.alpha)}", file=out)
    print(f"E {_fmt(res.E)}", file=out)
    print(f"certified_lower {_fmt(res.certified_lower)}", file=out)
    print("numerator " + " ".join(_fmt(c) for c in res.r.num.coeffs), file=out)
    print("denominator " + " ".join(_fmt(c) for c in res.r.den.coeffs), file=out)
    print("nodes " + " ".join(_fmt(x) for x in res.nodes), file=out)
    print(f"remez_iters {res.remez_iters}", file=out)
    _print_pf(lambda: h_factor(args.m, args.l, args.p, args.alpha)[0].pf, out)
    return EXIT_OK


def cmd_pade(args, out):
    from .matroot import h_factor
    from .polyrat import pade_coeffs

    P = pade_coeffs(args.m, args.l, args.p)
    print(f"type {args.m} {args.l} p {args.p}", file=out)
    print("numerator " + " ".join(_fmt(c) for c in P.num.coeffs), file=out)
    print("denominator " + " ".join(_fmt(c) for c in P.den.coeffs), file=out)
    _print_pf(lambda: h_factor(args.m, args.l, args.p, 1.0)[0].pf, out)
    return EXIT_OK


def cmd_table(args, out):
    from .scalar import ratio_table

    out.write(ratio_table(args.m, args.l, args.p, args.eps0, args.k).to_csv())
    return EXIT_OK


def cmd_regions(args, out):
    from .scalar import NONCONVERGED, RegionRequest, region_sample

    log_range, arg_range = _rect(args.rect)
    req = RegionRequest(log_range, arg_range, _res(args.res))
    grid = region_sample(req, args.k, args.delta, args.alpha, args.m, args.l, args.p, args.mode)
    with open(args.out, "w") as fh:
        fh.write(grid.to_csv())
    total = grid.k_converged.size
    print("k_converged,cells,fraction", file=out)
    for k, c in sorted(grid.counts().items()):
        label = "nonconverged" if k == NONCONVERGED else str(k)
        print(f"{label},{c},{c / total:.6f}", file=out)
    rotated = int(np.count_nonzero(grid.rotation >= 0))
    print(f"rotated,{rotated},{rotated / total:.6f}", file=out)
    return EXIT_OK


def cmd_kappa(args, out):
    from .matroot import IterationConfig, compute_root, condition_number_kappa_p

    A = linalg.read_matrix_market(args.inp)
    if args.root:
        X = linalg.read_matrix_market(args.root)
    else:
        X = compute_root(A, IterationConfig(p=args.p, m=args.m, mode=args.mode)).Y_tilde
    print(f"kappa {_fmt(condition_number_kappa_p(A, X, args.p))}", file=out)
    return EXIT_OK


def cmd_selftest(args, out):
    from .acceptance import run_all

    ok = run_all(report=lambda line: print(line, file=out, flush=True))
    print("selftest " + ("passed" if ok else "FAILED"), file=out)
    return EXIT_OK if ok else EXIT_SOLVER


COMMANDS = {
    "root": cmd_root,
    "minimax": cmd_minimax,
    "pade": cmd_pade,
    "table": cmd_table,
    "regions": cmd_regions,
    "kappa": cmd_kappa,
    "selftest": cmd_selftest,
}


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    try:
        args = build_parser().parse_args(argv)
        _validate(args)
        return COMMANDS[args.command](args, out)
    except UsageError as exc:
        print(f"rootiter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MatrixMarketError, DomainError, OSError) as exc:
        print(f"rootiter: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DivergenceError as exc:
        print(f"rootiter: diverged: {exc}", file=sys.stderr)
        return EXIT_DIVERGED
    except (ConvergenceError, SingularMatrixError, RootIterError) as exc:
        print(f"rootiter: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
