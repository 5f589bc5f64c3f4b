import logging
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import conf
from .problem_instance import DomainError, Size, is_infinite

logger = logging.getLogger(__name__)

# Halvings allowed when pushing the lower bracket toward zero at lambda = 0
_MAX_LOWER_STEPS = 2000


@dataclass(frozen=True)
class KappaResult:
    """ Solved effective regularizer. """
    kappa: float
    # lambda / kappa + df / N - 1 at kappa
    residual: float
    iterations: int


class KappaNoRootError(ValueError):
    """ Raised when the fixed point has no positive solution. """
    pass


class KappaConvergenceError(ArithmeticError):
    """ Raised when bisection runs out of iterations before the residual
    is small enough. """

    def __init__(self, message: str, bracket: Tuple[float, float]):
        super().__init__(message)
        self.bracket = bracket


def fixed_point_residual(kappa: float, lam: float, n: int,
                         eigenvalues: np.ndarray) -> float:
    """ lambda / kappa + (1/N) sum_i l_i / (l_i + kappa) - 1; strictly
    decreasing in kappa. """
    degrees = float(np.sum(eigenvalues / (eigenvalues + kappa)))
    return lam / kappa + degrees / n - 1


def solve_kappa(lam: float, n: Size, spectrum,
                tol: Optional[float] = None,
                max_iter: Optional[int] = None) -> KappaResult:
    """ Solves lambda / kappa + (1/N) sum_i l_i / (l_i + kappa) = 1 for
    kappa by bisection on log kappa.
    :param lam: Ridge regularizer, >= 0.
    :param n: Dataset size; infinite data gives kappa = lambda.
    :param spectrum: PowerLawProblem or ExplicitInstance; only its
    eigenvalues are used.
    :param tol: Residual tolerance, KAPPA_TOL by default.
    :param max_iter: Iteration cap, KAPPA_MAX_ITER by default.
    """
    tol = conf.get('KAPPA_TOL') if tol is None else tol
    max_iter = conf.get('KAPPA_MAX_ITER') if max_iter is None else max_iter
    if not lam >= 0:
        raise DomainError(f'lambda must be >= 0, got {lam}')
    if is_infinite(n):
        if lam == 0:
            raise KappaNoRootError('kappa is zero for lambda = 0 with '
                                   'infinite data')
        return KappaResult(kappa=lam, residual=0.0, iterations=0)
    if n < 1:
        raise DomainError(f'n must be >= 1, got {n}')

    eigenvalues = spectrum.eigenvalues

    def residual(kappa):
        return fixed_point_residual(kappa, lam, n, eigenvalues)

    if lam > 0:
        lo = lam
    else:
        # The degrees of freedom never exceed the mode count.
        if len(eigenvalues) <= n:
            raise KappaNoRootError(
                f'lambda = 0 needs more than N = {n} modes, spectrum has '
                f'{len(eigenvalues)}')
        lo = float(eigenvalues.min())
        steps = 0
        while residual(lo) <= 0:
            lo /= 1024
            steps += 1
            if steps > _MAX_LOWER_STEPS or lo == 0:
                raise KappaNoRootError(
                    'could not bracket the root from below at lambda = 0')

    f_lo = residual(lo)
    if abs(f_lo) < tol:
        return KappaResult(kappa=lo, residual=f_lo, iterations=0)

    hi = 2 * lo
    while residual(hi) >= 0:
        lo, hi = hi, 2 * hi
    logger.debug('kappa bracket [%r, %r] for lambda=%r n=%r', lo, hi, lam, n)

    log_lo, log_hi = math.log(lo), math.log(hi)
    for iteration in range(1, max_iter + 1):
        log_mid = 0.5 * (log_lo + log_hi)
        kappa = math.exp(log_mid)
        f_mid = residual(kappa)
        if abs(f_mid) < tol:
            logger.debug('kappa=%r after %d iterations', kappa, iteration)
            return KappaResult(
                kappa=max(kappa, lam), residual=f_mid, iterations=iteration)
        if f_mid > 0:
            log_lo = log_mid
        else:
            log_hi = log_mid
    raise KappaConvergenceError(
        f'no convergence after {max_iter} iterations',
        (math.exp(log_lo), math.exp(log_hi)))


def kappa_asymptotic(lam: float, n: int, gamma: float) -> float:
    """ Order of the effective regularizer, max(lambda, N^{-1-gamma}). """
    return max(lam, float(n) ** (-1 - gamma))
