import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from . import conf
from .det_equiv import (
    DetEquivResult, RidgeConfig, l1_det_expected, l1_det_explicit,
    l2_det_expected)
from .problem_instance import (
    DomainError, ExplicitInstance, PowerLawProblem, is_infinite)

logger = logging.getLogger(__name__)

# Relative residual a ridge solve must reach
_SOLVE_RTOL = 1e-8


@dataclass(frozen=True, eq=False)
class SyntheticDraw:
    """ One training set: inputs, mixed labels and the two objectives. """
    x: np.ndarray
    y: np.ndarray
    beta1: np.ndarray
    beta2: np.ndarray
    # True where the label comes from beta1
    label_mask: np.ndarray


@dataclass(frozen=True)
class TrialStats:
    mean_l1: float
    mean_l2: float
    stderr_l1: float
    stderr_l2: float
    trials: int
    seed: int


@dataclass(frozen=True)
class ValidationReport:
    """ Simulated losses next to the deterministic equivalents they should
    match. """
    stats: TrialStats
    # Deterministic equivalents averaged over the model
    expected_l1: DetEquivResult
    expected_l2: DetEquivResult
    # Mean over trials of the deterministic equivalent on the drawn objectives
    sampled_l1: float
    sampled_l2: float


class RidgeSolveError(ArithmeticError):
    """ Raised when the ridge normal equations cannot be solved. """
    pass


def sample_betas(problem: PowerLawProblem, rng: np.random.Generator) \
        -> Tuple[np.ndarray, np.ndarray]:
    """ Draws the two objectives with per-mode variance i^{-delta} and
    per-mode correlation rho. """
    scale = np.sqrt(problem.alignment)
    u = rng.standard_normal(problem.p_trunc)
    v = rng.standard_normal(problem.p_trunc)
    beta1 = scale * u
    beta2 = scale * (problem.rho * u + math.sqrt(1 - problem.rho ** 2) * v)
    return beta1, beta2


def sample_inputs(n: int, problem: PowerLawProblem,
                  rng: np.random.Generator) -> np.ndarray:
    """ N Gaussian rows with covariance diag(i^{-1-gamma}). """
    if n < 1:
        raise DomainError(f'n must be >= 1, got {n}')
    z = rng.standard_normal((n, problem.p_trunc))
    return z * np.sqrt(problem.eigenvalues)


def label_count(n: int, alpha: float) -> int:
    """ Number of points labeled by the performance objective,
    alpha * N rounded half up. """
    return int(math.floor(alpha * n + 0.5))


def draw_synthetic(problem: PowerLawProblem, cfg: RidgeConfig,
                   rng: np.random.Generator) -> SyntheticDraw:
    """ Samples objectives and inputs, then labels a uniformly random
    subset of round(alpha N) points with beta1 and the rest with beta2. """
    if is_infinite(cfg.n):
        raise DomainError('simulation needs a finite n')
    beta1, beta2 = sample_betas(problem, rng)
    x = sample_inputs(cfg.n, problem, rng)
    mask = np.zeros(cfg.n, dtype=bool)
    mask[rng.choice(cfg.n, size=label_count(cfg.n, cfg.alpha),
                    replace=False)] = True
    y = np.where(mask, x @ beta1, x @ beta2)
    return SyntheticDraw(x=x, y=y, beta1=beta1, beta2=beta2, label_mask=mask)


def ridge_fit(draw: SyntheticDraw, lam: float) -> np.ndarray:
    """ Solves (X^T X / N + lambda I) beta = X^T y / N.
    :param draw: Training inputs and labels.
    :param lam: Ridge regularizer; 0 needs a full-rank X. """
    if lam < 0:
        raise DomainError(f'lambda must be >= 0, got {lam}')
    n, p = draw.x.shape
    if lam == 0 and n < p:
        raise RidgeSolveError(
            f'ridge system is singular: lambda = 0 with N = {n} < P = {p}')
    gram = draw.x.T @ draw.x / n + lam * np.eye(p)
    rhs = draw.x.T @ draw.y / n
    try:
        beta = scipy.linalg.solve(gram, rhs, assume_a='pos')
    except (np.linalg.LinAlgError, ValueError) as error:
        raise RidgeSolveError(f'ridge system is singular: {error}')
    if np.linalg.norm(gram @ beta - rhs) > _SOLVE_RTOL * np.linalg.norm(rhs):
        raise RidgeSolveError('ridge solve residual above tolerance')
    return beta


def population_losses(beta_hat: np.ndarray, beta1: np.ndarray,
                      beta2: np.ndarray,
                      problem: PowerLawProblem) -> Tuple[float, float]:
    """ Population squared errors of beta_hat against both objectives
    under the diagonal covariance. """
    if not len(beta_hat) == len(beta1) == len(beta2) == problem.p_trunc:
        raise DomainError('vectors must match the problem dimension')
    eigenvalues = problem.eigenvalues
    return (float(np.sum(eigenvalues * (beta_hat - beta1) ** 2)),
            float(np.sum(eigenvalues * (beta_hat - beta2) ** 2)))


def sampled_instance(problem: PowerLawProblem, beta1: np.ndarray,
                     beta2: np.ndarray) -> ExplicitInstance:
    """ Per-mode moments of one drawn pair of objectives. """
    difference = beta1 - beta2
    return ExplicitInstance(
        eigenvalues=problem.eigenvalues, a=beta1 ** 2, d=difference ** 2,
        m=difference * beta1)


def sampled_det_losses(problem: PowerLawProblem, cfg: RidgeConfig,
                       beta1: np.ndarray,
                       beta2: np.ndarray) -> Tuple[float, float]:
    """ Deterministic equivalents of both losses for one drawn pair of
    objectives. The safety loss is the performance loss of the exchanged
    pair at mixture 1 - alpha, with its moments taken from the draws. """
    l1 = l1_det_explicit(sampled_instance(problem, beta1, beta2), cfg)
    l2 = l1_det_explicit(sampled_instance(problem, beta2, beta1),
                         replace(cfg, alpha=1 - cfg.alpha))
    return l1.value, l2.value


def _trial(problem: PowerLawProblem, cfg: RidgeConfig, seed: int,
           index: int) -> Tuple[float, float, float, float]:
    rng = np.random.default_rng([seed, index])
    draw = draw_synthetic(problem, cfg, rng)
    l1, l2 = population_losses(
        ridge_fit(draw, cfg.lam), draw.beta1, draw.beta2, problem)
    return (l1, l2) + sampled_det_losses(
        problem, cfg, draw.beta1, draw.beta2)


def validate(problem: PowerLawProblem, cfg: RidgeConfig, trials: int,
             seed: int, p_sim: Optional[int] = None) -> ValidationReport:
    """ Fits ridge regression on independent synthetic draws and compares
    the average losses with the deterministic equivalents.
    :param problem: The power-law problem; simulated at p_sim modes.
    :param cfg: Finite n, label mixture and regularizer.
    :param trials: Number of independent draws, at least 2.
    :param seed: Root seed; trial t uses the stream (seed, t).
    :param p_sim: Simulation dimension, P_SIM by default.
    """
    if trials < 2:
        raise DomainError(f'trials must be >= 2, got {trials}')
    if is_infinite(cfg.n):
        raise DomainError('simulation needs a finite n')
    p_sim = conf.get('P_SIM') if p_sim is None else p_sim
    if p_sim > problem.p_trunc:
        raise DomainError(
            f'p_sim = {p_sim} exceeds p_trunc = {problem.p_trunc}')
    simulated = problem.truncated(p_sim)

    workers = min(conf.threads(), trials)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = np.array(list(pool.map(
            lambda index: _trial(simulated, cfg, seed, index),
            range(trials))))
    means = rows.mean(axis=0)
    stderrs = rows.std(axis=0, ddof=1) / math.sqrt(trials)
    stats = TrialStats(
        mean_l1=float(means[0]), mean_l2=float(means[1]),
        stderr_l1=float(stderrs[0]), stderr_l2=float(stderrs[1]),
        trials=trials, seed=seed)
    logger.info('%d trials at n=%d p=%d: L1 %.6g +- %.2g, L2 %.6g +- %.2g',
                trials, cfg.n, p_sim, stats.mean_l1, stats.stderr_l1,
                stats.mean_l2, stats.stderr_l2)
    return ValidationReport(
        stats=stats,
        expected_l1=l1_det_expected(simulated, cfg),
        expected_l2=l2_det_expected(simulated, cfg),
        sampled_l1=float(means[2]), sampled_l2=float(means[3]))
