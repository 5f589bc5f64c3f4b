import logging
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np

from .kappa_solver import solve_kappa
from .problem_instance import (
    INFINITY, DomainError, ExplicitInstance, ParameterError, PowerLawProblem,
    Size, is_infinite, lstar, resolvent_sum, stable_sum)

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class RidgeConfig:
    """ Dataset size, fraction of performance labels and ridge
    regularizer chosen by a company. """
    n: Size
    alpha: float
    lam: float

    def __post_init__(self):
        if not is_infinite(self.n):
            if int(self.n) != self.n or self.n < 1:
                raise ParameterError(
                    f'n must be an integer >= 1 or infinite, got {self.n}')
            object.__setattr__(self, 'n', int(self.n))
        if not 0 <= self.alpha <= 1:
            raise ParameterError(f'alpha must be in [0, 1], got {self.alpha}')
        if not 0 <= self.lam < 1:
            raise ParameterError(f'lambda must be in [0, 1), got {self.lam}')
        if self.lam == 0 and not is_infinite(self.n):
            raise ParameterError('lambda = 0 requires infinite n')


@dataclass(frozen=True)
class DetEquivResult:
    """ The five terms of the deterministic equivalent, the
    degrees-of-freedom factor Q and their assembly (t1 + ... + t5) / Q. """
    t1: float
    t2: float
    t3: float
    t4: float
    t5: float
    q: float
    kappa: float
    value: float

    @property
    def terms(self) -> Tuple[float, float, float, float, float]:
        return self.t1, self.t2, self.t3, self.t4, self.t5


class DegenerateRegimeError(ArithmeticError):
    """ Raised when the degrees-of-freedom factor Q is not positive. """
    pass


def _check_q(q: float) -> float:
    if not q > 0:
        raise DegenerateRegimeError(f'degrees-of-freedom factor Q = {q}')
    return q


def _assemble(terms, q: float, kappa: float,
              value: Optional[float] = None) -> DetEquivResult:
    if value is None:
        value = sum(terms) / q
    if not np.isfinite(value):
        raise DegenerateRegimeError(f'deterministic equivalent is {value}')
    return DetEquivResult(*(float(t) for t in terms), q=float(q),
                          kappa=float(kappa), value=float(value))


def l1_det_explicit(inst: ExplicitInstance,
                    cfg: RidgeConfig) -> DetEquivResult:
    """ Deterministic equivalent of the performance loss on a diagonal
    spectrum with per-mode moments.
    :param inst: Eigenvalues and per-mode moments a, d, m.
    :param cfg: Dataset size, label mixture and regularizer. """
    mix = 1 - cfg.alpha
    lam = inst.eigenvalues
    if is_infinite(cfg.n):
        # kappa = lambda, Q = 1 and every 1/N term vanishes
        kappa = cfg.lam
        denom = lam + kappa
        t1 = kappa ** 2 * stable_sum(lam * inst.a / denom ** 2)
        t2 = mix ** 2 * stable_sum(lam ** 3 * inst.d / denom ** 2)
        t3 = 2 * mix * kappa * stable_sum(lam ** 2 * inst.m / denom ** 2)
        return _assemble((t1, t2, t3, 0.0, 0.0), 1.0, kappa)

    kappa = solve_kappa(cfg.lam, cfg.n, inst).kappa
    denom = lam + kappa
    df2 = stable_sum(lam ** 2 / denom ** 2) / cfg.n
    q = _check_q(1 - df2)
    t1 = kappa ** 2 * stable_sum(lam * inst.a / denom ** 2)
    t2 = mix ** 2 * stable_sum(lam ** 3 * inst.d / denom ** 2)
    t3 = 2 * mix * kappa * stable_sum(lam ** 2 * inst.m / denom ** 2)
    t4 = -2 * mix * kappa * df2 * stable_sum(lam * inst.m / denom)
    t5 = mix * df2 * (stable_sum(lam * inst.d)
                      - 2 * mix * stable_sum(lam ** 2 * inst.d / denom))
    return _assemble((t1, t2, t3, t4, t5), q, kappa)


def l2_det_explicit(inst: ExplicitInstance,
                    cfg: RidgeConfig) -> DetEquivResult:
    """ Safety-loss counterpart of l1_det_explicit: the performance loss
    of the swapped objectives at mixture 1 - alpha. """
    return l1_det_explicit(inst.swapped(), replace(cfg, alpha=1 - cfg.alpha))


@dataclass(frozen=True)
class ExpectedTraces:
    """ Resolvent sums of the power-law model at one (N, lambda), shared by
    every mixture alpha. """
    problem: PowerLawProblem
    lstar: float
    kappa: float
    q: float
    # (1/N) sum_i l_i^2 / (l_i + kappa)^2, zero for infinite data
    df2: float
    s_dg1_2: float
    s_dg3_2: float
    s_dg2_2: float
    s_dgg2_1: float
    s_dg1_1: float
    # sum_i i^{-delta-1-gamma}
    s_dg1: float

    def l1(self, alpha: float) -> DetEquivResult:
        """ Expected deterministic equivalent of the performance loss at
        label mixture alpha. """
        mix = 1 - alpha
        one_minus_rho = 1 - self.problem.rho
        kappa = self.kappa
        t1 = kappa ** 2 * self.s_dg1_2
        t2 = 2 * mix ** 2 * one_minus_rho * self.s_dg3_2
        t3 = 2 * kappa * one_minus_rho * mix * self.s_dg2_2
        t4 = -2 * kappa * one_minus_rho * mix * self.df2 * self.s_dg1_1
        t5 = (2 * mix * one_minus_rho * self.df2
              * (self.s_dg1 - 2 * mix * self.s_dgg2_1))
        # Grouped by moment, the same quantity reads as four lines
        weighted = (
            kappa ** 2 * (1 - 2 * mix ** 2 * one_minus_rho) * self.s_dg1_2
            + mix ** 2 * self.lstar
            + 2 * kappa * one_minus_rho * mix * (1 - 2 * mix) * self.s_dg2_2
            + 2 * mix * one_minus_rho * self.df2 * (1 - 2 * mix)
            * self.s_dgg2_1)
        return _assemble((t1, t2, t3, t4, t5), self.q, kappa,
                         value=weighted / self.q)

    def l2(self, alpha: float) -> DetEquivResult:
        """ Safety counterpart; the model is symmetric in the objectives. """
        return self.l1(1 - alpha)


def expected_traces(problem: PowerLawProblem, n: Size,
                    lam: float) -> ExpectedTraces:
    """ Solves kappa and evaluates every resolvent sum the expected
    deterministic equivalent needs. Requires lambda > 0.
    :param problem: The power-law problem.
    :param n: Dataset size, possibly infinite.
    :param lam: Ridge regularizer. """
    if not lam > 0:
        raise DomainError(f'lambda must be > 0, got {lam}')
    kappa = solve_kappa(lam, n, problem).kappa
    g, dl = problem.gamma, problem.delta
    if is_infinite(n):
        df2 = 0.0
    else:
        df2 = resolvent_sum(problem, 2 + 2 * g, 2, kappa) / n
    return ExpectedTraces(
        problem=problem,
        lstar=lstar(problem),
        kappa=kappa,
        q=_check_q(1 - df2),
        df2=df2,
        s_dg1_2=resolvent_sum(problem, dl + 1 + g, 2, kappa),
        s_dg3_2=resolvent_sum(problem, dl + 3 * (1 + g), 2, kappa),
        s_dg2_2=resolvent_sum(problem, dl + 2 * (1 + g), 2, kappa),
        s_dgg2_1=resolvent_sum(problem, dl + 2 + 2 * g, 1, kappa),
        s_dg1_1=resolvent_sum(problem, dl + 1 + g, 1, kappa),
        s_dg1=stable_sum(problem.power(dl + 1 + g)))


def _ridgeless_infinite(problem: PowerLawProblem,
                        alpha: float) -> DetEquivResult:
    value = (1 - alpha) ** 2 * lstar(problem)
    return DetEquivResult(0.0, value, 0.0, 0.0, 0.0, q=1.0, kappa=0.0,
                          value=value)


def l1_det_expected(problem: PowerLawProblem,
                    cfg: RidgeConfig) -> DetEquivResult:
    """ Deterministic equivalent of the performance loss averaged over the
    power-law model, built from resolvent sums.
    :param problem: The power-law problem.
    :param cfg: Dataset size (possibly infinite), mixture and regularizer.
    """
    if cfg.lam == 0:
        return _ridgeless_infinite(problem, cfg.alpha)
    return expected_traces(problem, cfg.n, cfg.lam).l1(cfg.alpha)


def l2_det_expected(problem: PowerLawProblem,
                    cfg: RidgeConfig) -> DetEquivResult:
    """ Deterministic equivalent of the safety loss: the performance loss of
    the swapped problem at mixture 1 - alpha. """
    return l1_det_expected(problem.swapped(),
                           replace(cfg, alpha=1 - cfg.alpha))


def _check_alpha(alpha: float):
    if not 0 <= alpha <= 1:
        raise DomainError(f'alpha must be in [0, 1], got {alpha}')


def l2_simple_expected(problem: PowerLawProblem, alpha: float) -> float:
    """ Safety violation of the infinite-data ridgeless predictor,
    alpha^2 L*. """
    _check_alpha(alpha)
    return alpha ** 2 * lstar(problem)


def l1_infinite_ridgeless(problem: PowerLawProblem, alpha: float) -> float:
    """ Performance loss of the infinite-data ridgeless predictor,
    (1 - alpha)^2 L*. """
    _check_alpha(alpha)
    return (1 - alpha) ** 2 * lstar(problem)


def infinite_data_losses(problem: PowerLawProblem, alpha: float,
                         lam: float) -> Tuple[float, float]:
    """ (E L1, E L2) of the infinite-data ridge predictor. """
    cfg = RidgeConfig(INFINITY, alpha, lam)
    return (l1_det_expected(problem, cfg).value,
            l2_det_expected(problem, cfg).value)
