import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, NamedTuple, Optional

from . import conf
from .det_equiv import l2_simple_expected
from .problem_instance import (
    INFINITY, DomainError, ParameterError, PowerLawProblem, Size, Threshold,
    is_infinite, lstar)
from .scaling_laws import Regime, optimize_lambda_exact

logger = logging.getLogger(__name__)

# Smallest incumbent constraint, as a fraction of L*, for each threshold law
WARMUP_TAU_FLOOR = 0.25
CONSTRAINED_TAU_FLOOR = 0.5625

# Relative slack when checking that evaluated losses do not increase with N
_MONOTONE_SLACK = 1e-6


@dataclass(frozen=True)
class CompanyConfig:
    """ Dataset size and safety threshold of a company. """
    n: Size
    tau: Threshold

    def __post_init__(self):
        if not is_infinite(self.n):
            if int(self.n) != self.n or self.n < 1:
                raise ParameterError(
                    f'n must be an integer >= 1 or infinite, got {self.n}')
            object.__setattr__(self, 'n', int(self.n))
        if not is_infinite(self.tau) and not self.tau > 0:
            raise ParameterError(
                f'tau must be > 0 or infinite, got {self.tau}')


@dataclass(frozen=True)
class MarketOutcome:
    """ Hyperparameters a company picks and what they achieve. """
    alpha: float
    lam: float
    perf_loss: float
    safety: float
    feasible: bool = True


@dataclass(frozen=True)
class ThresholdParams:
    """ Infinite-data quantities that the threshold laws are written in. """
    lstar: float
    alpha_star_i: float
    alpha_star_e: float
    g_i: float
    g_e: float
    # g_i - g_e
    d: float
    nu: float
    nu_prime: float


class ThetaThreshold(NamedTuple):
    # None when the law has a single form
    regime: Optional[Regime]
    value: Threshold


class ThresholdSearch(NamedTuple):
    n: Size
    # False when losses were not monotone in N past LINEAR_SCAN_LIMIT and
    # the bisection result was kept
    monotone: bool = True


class InfeasibleModelError(ValueError):
    """ Raised when a safety threshold is below what the market model
    admits. """
    pass


class ThresholdSearchError(RuntimeError):
    """ Raised when the entrant search passes the largest dataset size it
    may try. """
    pass


def _capped(problem: PowerLawProblem, tau: Threshold) -> float:
    best = lstar(problem)
    return best if is_infinite(tau) else min(tau, best)


def require_tau(problem: PowerLawProblem, tau: Threshold,
                floor: float = WARMUP_TAU_FLOOR):
    if is_infinite(tau):
        return
    if tau < floor * lstar(problem):
        raise InfeasibleModelError(
            f'tau = {tau} is below {floor} L* = {floor * lstar(problem)}')


def alpha_star(problem: PowerLawProblem, tau: Threshold) -> float:
    """ Largest performance fraction whose infinite-data safety violation
    alpha^2 L* stays within tau, clipped to [0.5, 1]. """
    best = lstar(problem)
    if best == 0:
        return 1.0
    return min(max(math.sqrt(_capped(problem, tau) / best), 0.5), 1.0)


def infinite_data_loss(problem: PowerLawProblem, tau: Threshold) -> float:
    """ Best infinite-data performance loss under safety threshold tau,
    (sqrt(L*) - sqrt(min(tau, L*)))^2. """
    return (math.sqrt(lstar(problem))
            - math.sqrt(_capped(problem, tau))) ** 2


def threshold_params(problem: PowerLawProblem, tau_i: Threshold,
                     tau_e: Threshold = INFINITY) -> ThresholdParams:
    g_i = infinite_data_loss(problem, tau_i)
    g_e = infinite_data_loss(problem, tau_e)
    return ThresholdParams(
        lstar=lstar(problem),
        alpha_star_i=alpha_star(problem, tau_i),
        alpha_star_e=alpha_star(problem, tau_e),
        g_i=g_i, g_e=g_e, d=g_i - g_e,
        nu=problem.nu, nu_prime=problem.nu_prime)


def incumbent_infinite_opt(problem: PowerLawProblem,
                           tau: Threshold) -> MarketOutcome:
    """ Optimum of a company with infinite data: ridgeless regression at
    alpha = sqrt(min(tau, L*) / L*).
    :param tau: Safety threshold, at least L* / 4. """
    require_tau(problem, tau)
    alpha = alpha_star(problem, tau)
    return MarketOutcome(
        alpha=alpha, lam=0.0, perf_loss=infinite_data_loss(problem, tau),
        safety=_capped(problem, tau))


def company_opt_simple(problem: PowerLawProblem,
                       cfg: CompanyConfig) -> MarketOutcome:
    """ Optimum of a company whose safety is measured by alpha^2 L*: the
    constraint fixes alpha and lambda is optimized for performance. """
    require_tau(problem, cfg.tau)
    if is_infinite(cfg.n):
        return incumbent_infinite_opt(problem, cfg.tau)
    alpha = 1.0 if is_infinite(cfg.tau) else alpha_star(problem, cfg.tau)
    optimum = optimize_lambda_exact(problem, cfg.n, alpha, 'loss')
    return MarketOutcome(
        alpha=alpha, lam=optimum.lambda_star, perf_loss=optimum.value,
        safety=l2_simple_expected(problem, alpha))


def _monotone(seen: Dict[int, float]) -> bool:
    losses = [seen[n] for n in sorted(seen)]
    return all(later <= earlier * (1 + _MONOTONE_SLACK) + 1e-300
               for earlier, later in zip(losses, losses[1:]))


def search_threshold(entrant_loss: Callable[[int], Optional[float]],
                     target: float) -> ThresholdSearch:
    """ Smallest N whose entrant loss is at most target, by doubling and
    then bisection. None from entrant_loss means the entrant cannot enter
    at that N.
    :param entrant_loss: Optimized entrant loss as a function of N.
    :param target: Loss the entrant has to match. """
    n_max = conf.get('MAX_ENTRANT_N')
    seen: Dict[int, float] = {}

    def enters(n: int) -> bool:
        loss = entrant_loss(n)
        seen[n] = math.inf if loss is None else loss
        return seen[n] <= target

    if enters(1):
        return ThresholdSearch(1)
    lo, hi = 1, 2
    while not enters(hi):
        lo, hi = hi, 2 * hi
        if hi > n_max:
            raise ThresholdSearchError(
                f'entrant loss stays above {target} up to N = {n_max}')
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if enters(mid):
            hi = mid
        else:
            lo = mid

    if not _monotone(seen):
        if hi <= conf.get('LINEAR_SCAN_LIMIT'):
            logger.warning('entrant loss is not monotone in N, scanning '
                           '1..%d linearly', hi)
            return ThresholdSearch(
                next(n for n in range(1, hi + 1) if enters(n)))
        logger.warning('entrant loss is not monotone in N; keeping the '
                       'bisection result %d', hi)
        return ThresholdSearch(hi, monotone=False)
    logger.info('entry threshold %d after %d evaluations', hi, len(seen))
    return ThresholdSearch(hi)


def entry_threshold_search(problem: PowerLawProblem,
                           incumbent: CompanyConfig,
                           entrant: CompanyConfig) -> ThresholdSearch:
    """ Smallest entrant dataset size whose optimized performance loss is
    at most the incumbent's.
    :return: The threshold, with n INFINITY when even infinite data does
    not get the entrant there. """
    target = company_opt_simple(problem, incumbent).perf_loss
    if infinite_data_loss(problem, entrant.tau) >= target:
        return ThresholdSearch(INFINITY)
    return search_threshold(
        lambda n: company_opt_simple(
            problem, CompanyConfig(n, entrant.tau)).perf_loss,
        target)


def threshold_warmup(problem: PowerLawProblem,
                     tau_i: Threshold) -> Threshold:
    """ Threshold against an incumbent with infinite data when the entrant
    has no safety constraint, G_I^{-1/nu}. """
    require_tau(problem, tau_i)
    g_i = infinite_data_loss(problem, tau_i)
    if g_i == 0:
        return INFINITY
    return g_i ** (-1 / problem.nu)


def finite_incumbent_threshold(problem: PowerLawProblem, n_i: Size,
                               g_i: float) -> ThetaThreshold:
    """ Three-regime threshold against an incumbent with N_I points and
    infinite-data loss g_i, entrant unconstrained. """
    if is_infinite(n_i):
        if g_i == 0:
            return ThetaThreshold(Regime.R3, INFINITY)
        return ThetaThreshold(Regime.R3, g_i ** (-1 / problem.nu))
    if g_i == 0:
        return ThetaThreshold(Regime.R1, float(n_i))
    nu, one_minus_rho = problem.nu, 1 - problem.rho
    first = (g_i * one_minus_rho) ** (-1 / (2 * nu))
    second = g_i ** (-0.5 - 1 / nu) * one_minus_rho ** 0.5
    if n_i <= first:
        return ThetaThreshold(Regime.R1, float(n_i))
    if n_i <= second:
        return ThetaThreshold(
            Regime.R2,
            float(n_i) ** (1 / (nu + 1))
            * (g_i * one_minus_rho) ** (-1 / (2 * (nu + 1))))
    return ThetaThreshold(Regime.R3, g_i ** (-1 / nu))


def threshold_finite(problem: PowerLawProblem, n_i: Size,
                     tau_i: Threshold) -> ThetaThreshold:
    """ Threshold against an incumbent with N_I points and safety
    threshold tau_I when the entrant has no safety constraint. """
    require_tau(problem, tau_i)
    return finite_incumbent_threshold(
        problem, n_i, infinite_data_loss(problem, tau_i))


def threshold_constrained(problem: PowerLawProblem, tau_i: Threshold,
                          tau_e: Threshold) -> ThetaThreshold:
    """ Threshold against an incumbent with infinite data when the entrant
    faces the looser safety threshold tau_E > tau_I. The third regime only
    exists when delta > 1. """
    require_tau(problem, tau_i, CONSTRAINED_TAU_FLOOR)
    if is_infinite(tau_i) or (not is_infinite(tau_e) and tau_e <= tau_i):
        raise DomainError('the entrant threshold must exceed the '
                          f'incumbent threshold, got {tau_e} <= {tau_i}')
    params = threshold_params(problem, tau_i, tau_e)
    if params.d <= 0:
        return ThetaThreshold(None, INFINITY)
    nu, nu_prime = params.nu, params.nu_prime
    scale = params.g_e * (1 - problem.rho)
    upper = math.sqrt(scale)
    lower = scale ** (nu / (2 * (nu - nu_prime))) if nu > nu_prime else 0.0
    if params.d >= upper:
        return ThetaThreshold(Regime.R1, params.d ** (-1 / nu))
    if params.d >= lower:
        return ThetaThreshold(
            Regime.R2, params.d ** (-(nu + 1) / nu) * upper)
    return ThetaThreshold(
        Regime.R3, (params.d / upper) ** (-(nu_prime + 1) / nu_prime))
