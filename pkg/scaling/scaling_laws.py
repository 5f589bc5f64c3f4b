import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Callable, NamedTuple, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from . import conf
from .det_equiv import RidgeConfig, l1_det_expected, l1_infinite_ridgeless
from .problem_instance import DomainError, PowerLawProblem, is_infinite

logger = logging.getLogger(__name__)

OBJECTIVES = ('loss', 'excess')

# Relative change below which neighbouring grid values count as equal
_FLAT = 1e-10
_GOLDEN_XTOL = 1e-5


class Regime(str, Enum):
    R1 = 'R1'
    R2 = 'R2'
    R3 = 'R3'


@dataclass(frozen=True)
class LossComponents:
    """ Asymptotic error components, constants dropped. """
    finite_data: float
    mixture: float
    overfitting: float
    mixture_finite_data: float
    total: float


@dataclass(frozen=True)
class RegimeReport:
    """ Scaling regime of the optimally regularized loss at one N. """
    regime: Regime
    # N-thresholds between R1/R2 and R2/R3; math.inf when unreachable
    boundaries: Tuple[float, float]
    # Local scaling exponent
    exponent: float
    value: float
    lambda_rule: float


class LambdaOptimum(NamedTuple):
    lambda_star: float
    value: float
    # True when the coarse scan was not unimodal and a dense scan was used
    fallback: bool = False


def _check_components(problem: PowerLawProblem, cfg: RidgeConfig,
                      min_alpha: float):
    if cfg.alpha < min_alpha:
        raise DomainError(
            f'alpha must be >= {min_alpha}, got {cfg.alpha}')
    if not 0 < cfg.lam < 1:
        raise DomainError(f'lambda must be in (0, 1), got {cfg.lam}')
    if is_infinite(cfg.n):
        raise DomainError('scaling laws need a finite n')


def _finite_data(problem: PowerLawProblem, lam: float, n: int,
                 exponent: float) -> float:
    return max(lam ** (exponent / (1 + problem.gamma)), float(n) ** -exponent)


def _overfitting(problem: PowerLawProblem, cfg: RidgeConfig) -> float:
    effective = min(cfg.lam ** (-1 / (1 + problem.gamma)), cfg.n)
    return (1 - cfg.alpha) * (1 - problem.rho) * effective / cfg.n


def loss_components(problem: PowerLawProblem,
                    cfg: RidgeConfig) -> LossComponents:
    """ Finite-data, mixture and overfitting errors of the performance
    loss.
    :param problem: The power-law problem.
    :param cfg: Finite n, alpha >= 0.5 and lambda in (0, 1). """
    _check_components(problem, cfg, 0.5)
    finite = _finite_data(problem, cfg.lam, cfg.n, problem.nu)
    mixture = (1 - cfg.alpha) ** 2 * (1 - problem.rho)
    overfitting = _overfitting(problem, cfg)
    return LossComponents(
        finite_data=finite, mixture=mixture, overfitting=overfitting,
        mixture_finite_data=0.0, total=finite + mixture + overfitting)


def excess_components(problem: PowerLawProblem,
                      cfg: RidgeConfig) -> LossComponents:
    """ Components of the loss in excess of the infinite-data ridgeless
    loss. Requires alpha >= 0.75. """
    _check_components(problem, cfg, 0.75)
    finite = _finite_data(problem, cfg.lam, cfg.n, problem.nu)
    mixture_finite = ((1 - problem.rho) * (1 - cfg.alpha)
                      * _finite_data(problem, cfg.lam, cfg.n,
                                     problem.nu_prime))
    overfitting = _overfitting(problem, cfg)
    return LossComponents(
        finite_data=finite, mixture=0.0, overfitting=overfitting,
        mixture_finite_data=mixture_finite,
        total=finite + mixture_finite + overfitting)


def _check_regime_args(n, alpha: float, min_alpha: float):
    if is_infinite(n) or n < 1:
        raise DomainError(f'n must be a finite integer >= 1, got {n}')
    if not min_alpha <= alpha <= 1:
        raise DomainError(f'alpha must be in [{min_alpha}, 1], got {alpha}')


def _classify(n: float, boundaries: Tuple[float, float]) -> Regime:
    if n <= boundaries[0]:
        return Regime.R1
    if n <= boundaries[1]:
        return Regime.R2
    return Regime.R3


def _single_objective(problem: PowerLawProblem, n: int) -> RegimeReport:
    return RegimeReport(
        regime=Regime.R1, boundaries=(math.inf, math.inf),
        exponent=problem.nu, value=float(n) ** -problem.nu,
        lambda_rule=float(n) ** (-1 - problem.gamma))


def opt_loss_regime(problem: PowerLawProblem, n: int,
                    alpha: float) -> RegimeReport:
    """ Regime, asymptotic value and regularization rule of the optimally
    regularized performance loss.
    :param n: Dataset size.
    :param alpha: Fraction of performance labels, in [0.5, 1]. """
    _check_regime_args(n, alpha, 0.5)
    if alpha == 1:
        return _single_objective(problem, n)
    nu, gamma = problem.nu, problem.gamma
    mixed = (1 - alpha) * (1 - problem.rho)
    boundaries = (mixed ** (-1 / nu),
                  (1 - alpha) ** (-(2 + nu) / nu)
                  * (1 - problem.rho) ** (-1 / nu))
    regime = _classify(n, boundaries)
    if regime is Regime.R1:
        return RegimeReport(
            regime, boundaries, nu, float(n) ** -nu,
            float(n) ** (-1 - gamma))
    if regime is Regime.R2:
        return RegimeReport(
            regime, boundaries, nu / (nu + 1),
            (n / mixed) ** (-nu / (nu + 1)),
            (mixed / n) ** ((1 + gamma) / (nu + 1)))
    return RegimeReport(
        regime, boundaries, 0.0, (1 - alpha) ** 2 * (1 - problem.rho),
        (n * (1 - alpha)) ** (-1 - gamma))


def opt_excess_regime(problem: PowerLawProblem, n: int,
                      alpha: float) -> RegimeReport:
    """ Regime, asymptotic value and regularization rule of the optimally
    regularized excess loss. The third regime exists only when
    nu' < nu, i.e. delta > 1.
    :param n: Dataset size.
    :param alpha: Fraction of performance labels, in [0.75, 1]. """
    _check_regime_args(n, alpha, 0.75)
    if alpha == 1:
        return _single_objective(problem, n)
    nu, nu_prime, gamma = problem.nu, problem.nu_prime, problem.gamma
    mixed = (1 - alpha) * (1 - problem.rho)
    if nu > nu_prime:
        upper = mixed ** (-(nu_prime + 1) / (nu - nu_prime))
    else:
        upper = math.inf
    boundaries = (mixed ** (-1 / nu), upper)
    regime = _classify(n, boundaries)
    if regime is Regime.R1:
        return RegimeReport(regime, boundaries, nu, float(n) ** -nu,
                            float(n) ** (-1 - gamma))
    if regime is Regime.R2:
        return RegimeReport(
            regime, boundaries, nu / (nu + 1),
            (n / mixed) ** (-nu / (nu + 1)),
            (mixed / n) ** ((1 + gamma) / (nu + 1)))
    exponent = nu_prime / (nu_prime + 1)
    return RegimeReport(
        regime, boundaries, exponent, mixed * float(n) ** -exponent,
        float(n) ** (-(1 + gamma) / (nu_prime + 1)))


def lambda_bounds(problem: PowerLawProblem, n: int) -> Tuple[float, float]:
    """ Search interval for lambda; the lower end sits well below the
    finite-data scale N^{-1-gamma}. """
    lower = min(conf.get('LAMBDA_MIN'),
                0.01 * float(n) ** (-1 - problem.gamma))
    return lower, conf.get('LAMBDA_MAX')


def _objective(problem: PowerLawProblem, n: int, alpha: float,
               objective: str) -> Callable[[float], float]:
    offset = 0.0
    if objective == 'excess':
        offset = l1_infinite_ridgeless(problem, alpha)

    def evaluate(log_lam: float) -> float:
        cfg = RidgeConfig(n, alpha, math.exp(log_lam))
        return l1_det_expected(problem, cfg).value - offset

    return evaluate


def _evaluate_grid(evaluate: Callable[[float], float],
                   points: Sequence[float]) -> np.ndarray:
    workers = min(conf.threads(), len(points))
    if workers <= 1:
        return np.array([evaluate(x) for x in points])
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return np.array(list(pool.map(evaluate, points)))


def _valley_count(values: np.ndarray) -> int:
    """ Number of local minima on a grid, ignoring changes within relative
    noise. """
    scale = np.maximum(np.abs(values[:-1]), np.abs(values[1:]))
    steps = np.diff(values)
    signs = np.sign(np.where(np.abs(steps) > _FLAT * scale, steps, 0.0))
    signs = signs[signs != 0]
    if len(signs) == 0:
        return 1
    interior = int(np.sum((signs[:-1] < 0) & (signs[1:] > 0)))
    return interior + int(signs[0] > 0) + int(signs[-1] < 0)


def _dense_scan(evaluate, lo: float, hi: float) -> LambdaOptimum:
    grid = np.linspace(lo, hi, conf.get('LAMBDA_DENSE_POINTS'))
    values = _evaluate_grid(evaluate, grid)
    best = int(np.argmin(values))
    return LambdaOptimum(math.exp(grid[best]), float(values[best]), True)


def optimize_lambda_exact(problem: PowerLawProblem, n: int, alpha: float,
                          objective: str = 'loss') -> LambdaOptimum:
    """ Minimizes the expected deterministic equivalent (or its excess over
    the infinite-data ridgeless loss) over lambda by golden-section search
    on log lambda.
    :param problem: The power-law problem.
    :param n: Finite dataset size.
    :param alpha: Fraction of performance labels.
    :param objective: 'loss' or 'excess'.
    :return: The minimizing lambda, the minimum and whether the dense
    fallback scan produced it.
    """
    if objective not in OBJECTIVES:
        raise DomainError(f'objective must be one of {OBJECTIVES}')
    if is_infinite(n) or n < 1:
        raise DomainError(f'n must be a finite integer >= 1, got {n}')
    if not 0 <= alpha <= 1:
        raise DomainError(f'alpha must be in [0, 1], got {alpha}')

    lam_lo, lam_hi = lambda_bounds(problem, n)
    lo, hi = math.log(lam_lo), math.log(lam_hi)
    evaluate = _objective(problem, n, alpha, objective)

    grid = list(np.linspace(lo, hi, conf.get('LAMBDA_COARSE_POINTS')))
    # Seed the scan with the regime's regularization rule where it is defined
    if objective == 'loss' and alpha >= 0.5:
        rule = opt_loss_regime(problem, n, alpha).lambda_rule
        grid.append(min(max(math.log(rule), lo), hi))
    elif objective == 'excess' and alpha >= 0.75:
        rule = opt_excess_regime(problem, n, alpha).lambda_rule
        grid.append(min(max(math.log(rule), lo), hi))
    grid = np.unique(np.array(grid))
    values = _evaluate_grid(evaluate, grid)

    if _valley_count(values) > 1:
        logger.warning(
            'objective is not unimodal in lambda at n=%r alpha=%r, using a '
            'dense scan', n, alpha)
        return _dense_scan(evaluate, lo, hi)

    best = int(np.argmin(values))
    if best == 0 or best == len(grid) - 1:
        return LambdaOptimum(math.exp(grid[best]), float(values[best]))
    left, centre, right = values[best - 1], values[best], values[best + 1]
    if min(left, right) - centre <= _FLAT * abs(centre):
        return LambdaOptimum(math.exp(grid[best]), float(centre))

    try:
        result = minimize_scalar(
            evaluate, method='golden',
            bracket=(grid[best - 1], grid[best], grid[best + 1]),
            options={'xtol': _GOLDEN_XTOL})
    except ValueError as error:
        logger.warning('golden-section bracket rejected (%s), using a dense '
                       'scan', error)
        return _dense_scan(evaluate, lo, hi)
    logger.debug('golden section at n=%r alpha=%r: log lambda %r after %r '
                 'evaluations', n, alpha, result.x, result.nfev)
    if result.fun < centre:
        return LambdaOptimum(math.exp(result.x), float(result.fun))
    return LambdaOptimum(math.exp(grid[best]), float(centre))
