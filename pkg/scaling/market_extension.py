"""
Market model in which a company's safety is judged by the deterministic
equivalent of its safety loss at the hyperparameters it trains with, rather
than by the infinite-data value alpha^2 L*.
"""
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from . import conf
from .det_equiv import RidgeConfig, expected_traces
from .market import (
    CompanyConfig, ThetaThreshold, ThresholdSearch, alpha_star,
    company_opt_simple, finite_incumbent_threshold, incumbent_infinite_opt,
    infinite_data_loss, require_tau, search_threshold, threshold_warmup)
from .problem_instance import (
    INFINITY, DomainError, PowerLawProblem, Size, Threshold, is_infinite,
    lstar)
from .scaling_laws import Regime, lambda_bounds

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ModifiedOutcome:
    """ Grid optimum of a company under the deterministic safety
    constraint. """
    alpha: float
    lam: float
    perf_loss: float
    safety_det: float
    feasible: bool


class UnsupportedRegimeError(ValueError):
    """ Raised outside the parameter range the modified-safety bounds are
    established for. """
    pass


def _require_small_delta(problem: PowerLawProblem):
    if problem.delta > 1:
        raise UnsupportedRegimeError(
            f'only delta <= 1 is supported, got delta = {problem.delta}')


def l2_excess_bounds(problem: PowerLawProblem,
                     cfg: RidgeConfig) -> Tuple[float, float]:
    """ Asymptotic bounds on alpha^2 L* - E[L2_det]: the gap is at least
    of order lower_gap from below and at most upper_gap from above.
    :param cfg: Finite n, alpha >= 0.5, lambda in (0, 1). """
    _require_small_delta(problem)
    if cfg.alpha < 0.5:
        raise DomainError(f'alpha must be >= 0.5, got {cfg.alpha}')
    if not 0 < cfg.lam < 1 or is_infinite(cfg.n):
        raise DomainError('bounds need lambda in (0, 1) and a finite n')
    gamma = problem.gamma
    finite = max(cfg.lam ** (problem.nu / (1 + gamma)),
                 float(cfg.n) ** -problem.nu)
    overfitting = ((1 - cfg.alpha) * (1 - problem.rho)
                   * min(cfg.lam ** (-1 / (1 + gamma)), cfg.n) / cfg.n)
    return finite, finite + overfitting


def _alpha_grid(points: Optional[int] = None) -> np.ndarray:
    return np.linspace(0.5, 1.0, points or conf.get('GRID_ALPHA_POINTS'))


def _lambda_grid(problem: PowerLawProblem, n: int,
                 points: Optional[int] = None) -> np.ndarray:
    lo, hi = lambda_bounds(problem, n)
    return np.geomspace(lo, hi, points or conf.get('GRID_LAMBDA_POINTS'))


def _grid_row(problem: PowerLawProblem, n: int, lam: float,
              alphas: np.ndarray):
    traces = expected_traces(problem, n, lam)
    perf = np.array([traces.l1(alpha).value for alpha in alphas])
    safety = np.array([traces.l2(alpha).value for alpha in alphas])
    return perf, safety


def company_opt_modified(problem: PowerLawProblem, cfg: CompanyConfig,
                         alpha_points: Optional[int] = None,
                         lambda_points: Optional[int] = None) \
        -> ModifiedOutcome:
    """ Minimizes the expected performance loss over an (alpha, lambda)
    grid, keeping only cells whose expected safety loss is within tau.
    :param cfg: Dataset size and safety threshold of the company.
    :param alpha_points: Alpha grid size on [0.5, 1].
    :param lambda_points: Log-spaced lambda grid size.
    """
    if is_infinite(cfg.n):
        best = incumbent_infinite_opt(problem, cfg.tau)
        return ModifiedOutcome(best.alpha, best.lam, best.perf_loss,
                               best.safety, True)
    if is_infinite(cfg.tau):
        # Without a constraint the optimum uses performance labels only
        simple = company_opt_simple(problem, cfg)
        safety = expected_traces(problem, cfg.n, simple.lam).l2(1.0).value
        return ModifiedOutcome(simple.alpha, simple.lam, simple.perf_loss,
                               safety, True)

    alphas = _alpha_grid(alpha_points)
    lambdas = _lambda_grid(problem, cfg.n, lambda_points)
    workers = min(conf.threads(), len(lambdas))
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(
            lambda lam: _grid_row(problem, cfg.n, lam, alphas), lambdas))
    perf = np.vstack([row[0] for row in rows])
    safety = np.vstack([row[1] for row in rows])

    feasible = safety <= cfg.tau
    if not feasible.any():
        logger.info('no feasible (alpha, lambda) at n=%d tau=%r',
                    cfg.n, cfg.tau)
        return ModifiedOutcome(math.nan, math.nan, math.inf, math.inf, False)
    # argmin over the flattened (lambda, alpha) order keeps the first tie
    best = int(np.argmin(np.where(feasible, perf, np.inf)))
    i, j = np.unravel_index(best, perf.shape)
    return ModifiedOutcome(
        alpha=float(alphas[j]), lam=float(lambdas[i]),
        perf_loss=float(perf[i, j]), safety_det=float(safety[i, j]),
        feasible=True)


def modified_threshold_search(problem: PowerLawProblem,
                              incumbent: CompanyConfig,
                              entrant: CompanyConfig) -> ThresholdSearch:
    """ Smallest entrant dataset size whose modified-safety optimum matches
    the incumbent's; an infeasible entrant at some N does not enter. """
    require_tau(problem, incumbent.tau)
    incumbent_best = company_opt_modified(problem, incumbent)
    if not incumbent_best.feasible:
        raise DomainError('the incumbent has no feasible hyperparameters')
    target = incumbent_best.perf_loss
    if infinite_data_loss(problem, entrant.tau) >= target:
        return ThresholdSearch(INFINITY)

    def entrant_loss(n: int) -> Optional[float]:
        outcome = company_opt_modified(problem, CompanyConfig(n, entrant.tau))
        return outcome.perf_loss if outcome.feasible else None

    return search_threshold(entrant_loss, target)


def alpha_tilde(alpha: float) -> float:
    """ sqrt((1 - alpha) + alpha^2), the effective performance fraction of
    a finite-data incumbent under the deterministic safety constraint. """
    return math.sqrt((1 - alpha) + alpha ** 2)


def modified_difference(alpha_star_e: float, gap: float,
                        lstar_value: float) -> float:
    """ D~ = alpha*_E gap - gap^2 / (4 L*), where gap = G_I - G_E. """
    return alpha_star_e * gap - gap ** 2 / (4 * lstar_value)


def modified_constrained_bound(problem: PowerLawProblem, d_tilde: float,
                               g_e: float, gap: float) -> float:
    """ max(D~^{-1/nu}, D~^{-(nu+1)/nu} (sqrt(G_E (1 - rho)) + gap / 2)). """
    nu = problem.nu
    return max(d_tilde ** (-1 / nu),
               d_tilde ** (-(nu + 1) / nu)
               * (math.sqrt(g_e * (1 - problem.rho)) + gap / 2))


def modified_threshold_bounds(problem: PowerLawProblem, n_i: Size,
                              tau_i: Threshold,
                              tau_e: Threshold) -> ThetaThreshold:
    """ Asymptotic upper bound on the modified-safety threshold.
    :param n_i: Incumbent dataset size, finite against an unconstrained
    entrant or infinite against a constrained one.
    :param tau_i: Incumbent safety threshold.
    :param tau_e: Entrant safety threshold. """
    _require_small_delta(problem)
    require_tau(problem, tau_i)
    if is_infinite(tau_e):
        if is_infinite(n_i):
            return ThetaThreshold(Regime.R3, threshold_warmup(problem, tau_i))
        effective = alpha_tilde(alpha_star(problem, tau_i))
        g_tilde = (1 - effective) ** 2 * (1 - problem.rho)
        return finite_incumbent_threshold(problem, n_i, g_tilde)
    if not is_infinite(n_i):
        raise UnsupportedRegimeError(
            'bounds cover a finite incumbent only against an unconstrained '
            'entrant')
    if is_infinite(tau_i) or tau_e <= tau_i:
        raise DomainError('the entrant threshold must exceed the '
                          f'incumbent threshold, got {tau_e} <= {tau_i}')
    g_e = infinite_data_loss(problem, tau_e)
    gap = infinite_data_loss(problem, tau_i) - g_e
    d_tilde = modified_difference(
        alpha_star(problem, tau_e), gap, lstar(problem))
    if d_tilde <= 0:
        return ThetaThreshold(None, INFINITY)
    return ThetaThreshold(
        None, modified_constrained_bound(problem, d_tilde, g_e, gap))
