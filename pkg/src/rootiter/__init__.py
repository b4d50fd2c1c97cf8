"""Rational minimax iterations for matrix p-th roots."""

from .errors import (CapacityError, ConvergenceError, DegenerateError, DimensionError,
                     DivergenceError, DomainError, IterateOverflowError, MatrixMarketError,
                     MultiplePoleError, PoleError, RootIterError, SingularMatrixError)
from .matroot import (IterationConfig, RootResult, compute_root, condition_number_kappa_p,
                      frechet_idempotency_defect, inverse_newton_scaled_root, newton_scaled_root)
from .minimax import MinimaxResult, alpha_next, asymptotic_C, minimax
from .polyrat import (PartialFractions, Polynomial, RationalFunction, eval_rational, pade_coeffs,
                      to_partial_fractions)
from .scalar import ScalarIteration, eps_recursion, ratio_table, region_sample, RegionRequest

__version__ = "0.1.0"
