import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property, lru_cache
from typing import Callable, Dict, Optional, Tuple, Union

import numpy as np

from . import conf

logger = logging.getLogger(__name__)


class Unbounded(Enum):
    """ Marker for an infinite dataset size, safety threshold or market-entry
    threshold. """
    INFINITY = 'inf'

    def __str__(self):
        return 'inf'


INFINITY = Unbounded.INFINITY

Size = Union[int, Unbounded]
Threshold = Union[float, Unbounded]


def is_infinite(value) -> bool:
    return value is INFINITY


class ParameterError(ValueError):
    """ Raised when a problem or configuration is built out of range. """
    pass


class DomainError(ValueError):
    """ Raised when an operation is called outside the range it is defined
    on. """
    pass


def stable_sum(terms: np.ndarray) -> float:
    """ Sums a series of decaying terms smallest-first in extended precision.
    :param terms: Terms ordered by mode index, i.e. largest first. """
    return float(np.sum(terms[::-1], dtype=np.longdouble))


@dataclass(frozen=True)
class PowerLawProblem:
    """ Power-law instance: eigenvalues i^{-1-gamma}, alignment i^{-delta}
    and objective correlation rho, truncated at p_trunc modes. """
    gamma: float
    delta: float
    rho: float
    p_trunc: int = field(default_factory=lambda: conf.get('P_TRUNC'))

    def __post_init__(self):
        if not self.gamma > 0:
            raise ParameterError(f'gamma must be > 0, got {self.gamma}')
        if not self.delta > 0:
            raise ParameterError(f'delta must be > 0, got {self.delta}')
        if not 0 <= self.rho < 1:
            raise ParameterError(f'rho must be in [0, 1), got {self.rho}')
        try:
            whole = int(self.p_trunc) == self.p_trunc
        except (TypeError, ValueError, OverflowError):
            whole = False
        if not whole or self.p_trunc < 1:
            raise ParameterError(
                f'p_trunc must be an integer >= 1, got {self.p_trunc}')
        object.__setattr__(self, 'p_trunc', int(self.p_trunc))

    @property
    def nu(self) -> float:
        return min(2 * (1 + self.gamma), self.delta + self.gamma)

    @property
    def nu_prime(self) -> float:
        return min(1 + self.gamma, self.delta + self.gamma)

    @cached_property
    def log_indices(self) -> np.ndarray:
        return np.log(np.arange(1, self.p_trunc + 1, dtype=np.float64))

    @cached_property
    def eigenvalues(self) -> np.ndarray:
        return self.power(1 + self.gamma)

    @cached_property
    def alignment(self) -> np.ndarray:
        return self.power(self.delta)

    def power(self, exponent: float) -> np.ndarray:
        """ The vector i^{-exponent} for i = 1..p_trunc. """
        return np.exp(-exponent * self.log_indices)

    def truncated(self, p_trunc: int) -> 'PowerLawProblem':
        return PowerLawProblem(self.gamma, self.delta, self.rho, p_trunc)

    def swapped(self) -> 'PowerLawProblem':
        """ The problem with the two objectives exchanged. Both objectives
        have the same alignment and the same cross moment, so this is the
        problem itself. """
        return self

    def to_explicit(self) -> 'ExplicitInstance':
        """ Materializes the expected per-mode moments of the model. """
        return ExplicitInstance(
            eigenvalues=self.eigenvalues,
            a=self.alignment,
            d=2 * (1 - self.rho) * self.alignment,
            m=(1 - self.rho) * self.alignment)

    @classmethod
    def from_params(cls, params: Dict) -> 'PowerLawProblem':
        """ Builds the problem from loosely typed request or CLI values. """
        p_trunc = params.get('p_trunc')
        try:
            return make_power_law(
                float(params['gamma']), float(params['delta']),
                float(params['rho']),
                None if p_trunc is None else float(p_trunc))
        except (TypeError, ValueError) as error:
            raise ParameterError(str(error)) from error


@dataclass(frozen=True, eq=False)
class ExplicitInstance:
    """ Finite spectrum with per-mode moments of the two objectives along
    each eigenvector. """
    # Positive, descending
    eigenvalues: np.ndarray
    # E<beta1, v_i>^2
    a: np.ndarray
    # E<beta1 - beta2, v_i>^2
    d: np.ndarray
    # E<beta1 - beta2, v_i><beta1, v_i>
    m: np.ndarray

    def __post_init__(self):
        for name in ('eigenvalues', 'a', 'd', 'm'):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=np.float64))
        size = len(self.eigenvalues)
        if size == 0 or any(
                len(vector) != size for vector in (self.a, self.d, self.m)):
            raise ParameterError(
                'eigenvalues, a, d and m must be non-empty and equally long')
        if np.any(self.eigenvalues <= 0):
            raise ParameterError('eigenvalues must be strictly positive')
        if np.any(self.a < 0) or np.any(self.d < 0):
            raise ParameterError('moments a and d must be non-negative')
        scale = np.maximum(self.a, self.d)
        slack = 1e-12 * np.maximum(scale * scale, 1e-300)
        if np.any(self.m ** 2 > self.a * self.d + slack):
            raise ParameterError('moments must satisfy m^2 <= a * d')

    def __len__(self):
        return len(self.eigenvalues)

    def swapped(self) -> 'ExplicitInstance':
        """ Moments seen from the second objective: beta2 takes the role of
        beta1 and the difference flips sign. """
        a = np.maximum(self.a - 2 * self.m + self.d, 0.0)
        # a cancels when beta2 is small next to beta1; keep m inside the bound
        bound = np.sqrt(a * self.d)
        return ExplicitInstance(
            eigenvalues=self.eigenvalues, a=a, d=self.d,
            m=np.clip(self.d - self.m, -bound, bound))


def make_power_law(gamma: float, delta: float, rho: float,
                   p_trunc: Optional[int] = None) -> PowerLawProblem:
    """ Builds a validated power-law problem.
    :param gamma: Eigenvalue decay exponent, eigenvalues are i^{-1-gamma}.
    :param delta: Alignment decay exponent, alignment is i^{-delta}.
    :param rho: Correlation between the objectives, in [0, 1).
    :param p_trunc: Number of modes kept; defaults to the P_TRUNC setting.
    """
    if p_trunc is None:
        p_trunc = conf.get('P_TRUNC')
    return PowerLawProblem(gamma, delta, rho, p_trunc)


def problem_for_nu(nu: float, rho: float,
                   p_trunc: Optional[int] = None) -> PowerLawProblem:
    """ A problem whose loss scaling exponent is nu, taking gamma = delta =
    nu / 2. """
    if not nu > 0:
        raise ParameterError(f'nu must be > 0, got {nu}')
    return make_power_law(nu / 2, nu / 2, rho, p_trunc)


@lru_cache(maxsize=128)
def lstar(problem: PowerLawProblem) -> float:
    """ Infinite-data gap between the objectives,
    2(1 - rho) sum_i i^{-delta-1-gamma}. """
    exponent = problem.delta + 1 + problem.gamma
    return 2 * (1 - problem.rho) * stable_sum(problem.power(exponent))


def lstar_with_tail(problem: PowerLawProblem) -> Tuple[float, float]:
    """ L* at the problem's truncation together with an upper bound on the
    part of the series that was cut off. """
    tail = (2 * (1 - problem.rho)
            * problem.p_trunc ** -(problem.delta + problem.gamma)
            / (problem.delta + problem.gamma))
    return lstar(problem), tail


def resolvent_sum(problem: PowerLawProblem, a_exp: float, b_pow: int,
                  kappa: float) -> float:
    """ Computes sum_i i^{-a_exp} / (i^{-1-gamma} + kappa)^{b_pow} over the
    truncated spectrum.
    :param a_exp: Exponent of the numerator.
    :param b_pow: Power of the resolvent denominator, 1 or 2.
    :param kappa: Effective regularizer, strictly positive. """
    if not kappa > 0:
        raise DomainError(f'kappa must be > 0, got {kappa}')
    if b_pow not in (1, 2):
        raise DomainError(f'b_pow must be 1 or 2, got {b_pow}')
    terms = problem.power(a_exp) / (problem.eigenvalues + kappa) ** b_pow
    return stable_sum(terms)


def _upper_kink(problem: PowerLawProblem, kappa: float) -> float:
    return max(1.0, kappa ** ((problem.delta - 1) / (1 + problem.gamma)))


# name -> (numerator exponent, denominator power, asymptotic form)
NAMED_SUMS: Dict[str, Tuple[Callable, int, Callable]] = {
    'dg1_2': (lambda p: p.delta + 1 + p.gamma, 2,
              lambda p, k: k ** -2 * k ** (p.nu / (1 + p.gamma))),
    'dg3_2': (lambda p: p.delta + 3 * (1 + p.gamma), 2,
              lambda p, k: 1.0),
    'dgg2_1': (lambda p: p.delta + 2 + 2 * p.gamma, 1,
               lambda p, k: 1.0),
    'dg2_2': (lambda p: p.delta + 2 * (1 + p.gamma), 2, _upper_kink),
    'dg1_1': (lambda p: p.delta + 1 + p.gamma, 1, _upper_kink),
    'g2_2': (lambda p: 2 + 2 * p.gamma, 2,
             lambda p, k: k ** (-1 / (1 + p.gamma))),
    'g1_1': (lambda p: 1 + p.gamma, 1,
             lambda p, k: k ** (-1 / (1 + p.gamma))),
    'g1_2': (lambda p: 1 + p.gamma, 2,
             lambda p, k: k ** -2 * k ** (p.gamma / (1 + p.gamma))),
}


def _named(name: str) -> Tuple[Callable, int, Callable]:
    try:
        return NAMED_SUMS[name]
    except KeyError:
        raise DomainError(
            f'unknown sum {name!r}, expected one of {sorted(NAMED_SUMS)}')


def named_resolvent_sum(problem: PowerLawProblem, name: str,
                        kappa: float) -> float:
    """ Exact truncated value of one of the named sums in NAMED_SUMS. """
    exponent, b_pow, _ = _named(name)
    return resolvent_sum(problem, exponent(problem), b_pow, kappa)


def resolvent_theta(problem: PowerLawProblem, name: str,
                    kappa: float) -> float:
    """ Asymptotic order, constants dropped, of one of the named sums. """
    if not kappa > 0:
        raise DomainError(f'kappa must be > 0, got {kappa}')
    _, _, theta = _named(name)
    return float(theta(problem, kappa))
