"""
Experiment runner behind the moscale management command: validates a flat
parameter map, evaluates one subcommand and writes its rows as CSV with a
commented provenance header. The figures subcommand sweeps default grids and
writes one CSV per panel.
"""
import csv
import logging
import sys
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Dict, Iterable, List, NamedTuple, Optional, \
    Sequence, TextIO, Tuple

import numpy as np

from . import market, market_extension
from .det_equiv import l1_det_expected, l2_det_expected
from .kappa_solver import kappa_asymptotic, solve_kappa
from .market import CompanyConfig
from .monte_carlo import validate
from .problem_instance import INFINITY, PowerLawProblem, Threshold, \
    is_infinite, lstar, make_power_law, problem_for_nu
from .scaling_laws import Regime, optimize_lambda_exact, opt_excess_regime, \
    opt_loss_regime
from .serializers import SERIALIZERS, normalize_params

logger = logging.getLogger(__name__)

SUBCOMMANDS = tuple(SERIALIZERS)

Row = Sequence
Table = Tuple[Sequence[str], Iterable[Row]]

# Default figure grids
WARMUP_NUS = (0.34, 0.5, 1.0, 2.0)
WARMUP_RHOS = (0.0, 0.25, 0.5, 0.75)
WARMUP_TAU_RELS = tuple(np.linspace(0.25, 0.99, 38))
SWEEP_RHO = 0.5
SWEEP_NU = 0.34
SCALING_ALPHA = 0.9
SCALING_N_GRID = (10.0, 1e5, 13)
FINITE_NUS = (0.34, 1.0, 2.0)
FINITE_RHOS = (0.0, 0.5, 0.9)
FINITE_TAU_REL = 0.49
FINITE_N_GRID = (1.0, 1e8, 33)
CONSTRAINED_NUS = (0.34, 1.0, 2.0)
CONSTRAINED_TAU_I_REL = 0.5625
CONSTRAINED_TAU_E_RELS = tuple(np.linspace(0.57, 0.99, 43))
CONSTRAINED_GAMMA = 0.5
CONSTRAINED_DELTA = 2.5


class ConfigError(ValueError):
    """ Raised when an experiment's parameters do not validate. """
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    """ One run: the subcommand, its flat parameter map, where the CSV goes
    (stdout when None; a directory for figures) and the root seed. """
    subcommand: str
    parameters: Dict[str, object] = field(default_factory=dict)
    output_path: Optional[Path] = None
    seed: int = 0


def read_config_file(path: Path) -> Dict[str, str]:
    """ Parses key=value lines; blank lines and lines starting with # are
    skipped.
    :param path: Location of the config file. """
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as error:
        raise ConfigError(f'cannot read config file {path}: {error}')
    result = {}
    for number, line in enumerate(lines, start=1):
        line = line.strip()
        if not line or line.startswith('#'):
            continue
        key, sep, value = line.partition('=')
        if not sep or not key.strip():
            raise ConfigError(f'{path}:{number}: expected key=value')
        result[key.strip()] = value.strip()
    return normalize_params(result)


def validated_parameters(subcommand: str, parameters: Dict) -> Dict:
    """ Runs the subcommand's serializer and returns its validated data. """
    if subcommand not in SERIALIZERS:
        raise ConfigError(f'unknown subcommand {subcommand!r}')
    serializer = SERIALIZERS[subcommand](data=normalize_params(parameters))
    if not serializer.is_valid():
        raise ConfigError(_describe_errors(serializer.errors))
    return dict(serializer.validated_data)


def _describe_errors(errors) -> str:
    parts = []
    for key, messages in errors.items():
        text = '; '.join(str(message) for message in messages)
        parts.append(text if key == 'non_field_errors' else f'{key}: {text}')
    return ', '.join(parts)


def format_value(value) -> str:
    """ CSV text of a value; floats round-trip through repr. """
    if value is None:
        return ''
    if is_infinite(value):
        return 'inf'
    if isinstance(value, Enum):
        return str(value.value)
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value)).lower()
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def _provenance(subcommand: str, resolved: Dict) -> List[str]:
    lines = [f'# moscale {subcommand}']
    for key in sorted(resolved):
        value = resolved[key]
        if isinstance(value, PowerLawProblem) or key == 'config':
            continue
        if isinstance(value, tuple):
            value = ':'.join(format_value(part) for part in value)
        lines.append(f'# {key}={format_value(value)}')
    return lines


@contextmanager
def _output(path: Optional[Path], stream: Optional[TextIO] = None):
    """ Yields a text handle; a file that fails mid-write is removed. """
    if path is None:
        yield stream or sys.stdout
        return
    path = Path(path)
    handle = open(path, 'w', newline='')
    try:
        yield handle
    except BaseException:
        handle.close()
        path.unlink(missing_ok=True)
        raise
    handle.close()


def write_table(path: Optional[Path], subcommand: str, resolved: Dict,
                table: Table, stream: Optional[TextIO] = None) -> int:
    """ Writes the provenance header, the column row and every data row.
    :return: The number of data rows written. """
    columns, rows = table
    count = 0
    with _output(path, stream) as handle:
        for line in _provenance(subcommand, resolved):
            handle.write(line + '\n')
        writer = csv.writer(handle, lineterminator='\n')
        writer.writerow(columns)
        for row in rows:
            writer.writerow([format_value(value) for value in row])
            count += 1
    if path is not None:
        logger.info('wrote %s (%d rows)', path, count)
    return count


def n_grid(lo: float, hi: float, points: int) -> List[int]:
    """ Distinct integers on a geometric grid from lo to hi. """
    return sorted({int(round(n)) for n in np.geomspace(lo, hi, points)})


def scaled_tau(problem: PowerLawProblem, tau, scale: str):
    """ Absolute threshold from one given relative to L* (scale lstar). """
    if is_infinite(tau) or scale == 'absolute':
        return tau
    return tau * lstar(problem)


def _kappa_table(params: Dict) -> Table:
    problem = params['problem']
    result = solve_kappa(params['lam'], params['n'], problem)
    columns = ('gamma', 'lambda', 'n', 'p_trunc', 'kappa', 'residual',
               'iterations', 'kappa_asymptotic')
    row = (params['gamma'], params['lam'], params['n'], problem.p_trunc,
           result.kappa, result.residual, result.iterations,
           kappa_asymptotic(params['lam'], params['n'], params['gamma']))
    return columns, [row]


def _detequiv_table(params: Dict) -> Table:
    evaluate = l1_det_expected if params['objective'] == 'l1' \
        else l2_det_expected
    result = evaluate(params['problem'], params['config'])
    columns = ('objective', 't1', 't2', 't3', 't4', 't5', 'q', 'kappa',
               'value')
    return columns, [(params['objective'], *result.terms, result.q,
                      result.kappa, result.value)]


def _curve_rows(problem: PowerLawProblem, objective: str, alpha: float,
                sizes: Iterable[int]) -> Iterable[Row]:
    regime_of = opt_loss_regime if objective == 'loss' else opt_excess_regime
    for n in sizes:
        optimum = optimize_lambda_exact(problem, n, alpha, objective)
        report = regime_of(problem, n, alpha)
        yield n, optimum.value, report.value, report.regime, \
            optimum.lambda_star


CURVE_COLUMNS = ('n', 'exact_value', 'theta_value', 'regime', 'lambda_star')


def _scaling_curve_table(params: Dict) -> Table:
    return CURVE_COLUMNS, _curve_rows(
        params['problem'], params['objective'], params['alpha'],
        n_grid(*params['n_grid']))


class EntryThreshold(NamedTuple):
    # None for searches and for laws with a single form
    regime: Optional[Regime]
    value: Threshold
    # False when a search kept a bisection result over non-monotone losses
    monotone: bool = True


def _threshold_law(problem: PowerLawProblem, mode: str, det: bool, n_i,
                   tau_i, tau_e):
    if mode == 'warmup':
        if det:
            return market_extension.modified_threshold_bounds(
                problem, INFINITY, tau_i, INFINITY)
        return None, market.threshold_warmup(problem, tau_i)
    if mode == 'finite':
        if det:
            return market_extension.modified_threshold_bounds(
                problem, n_i, tau_i, INFINITY)
        return market.threshold_finite(problem, n_i, tau_i)
    if det:
        return market_extension.modified_threshold_bounds(
            problem, INFINITY, tau_i, tau_e)
    return market.threshold_constrained(problem, tau_i, tau_e)


def entry_threshold(problem: PowerLawProblem, mode: str, safety_model: str,
                    n_i, tau_i, tau_e=INFINITY) -> EntryThreshold:
    """ Entry threshold for one parameter set.
    :param mode: warmup, finite, constrained or search.
    :param safety_model: simple (alpha^2 L*) or det (deterministic
    equivalent of the safety loss).
    :param n_i: Incumbent dataset size.
    :param tau_i: Incumbent safety threshold, absolute.
    :param tau_e: Entrant safety threshold, absolute. """
    det = safety_model == 'det'
    if mode != 'search':
        return EntryThreshold(
            *_threshold_law(problem, mode, det, n_i, tau_i, tau_e))
    incumbent, entrant = CompanyConfig(n_i, tau_i), CompanyConfig(1, tau_e)
    search = (market_extension.modified_threshold_search if det
              else market.entry_threshold_search)
    found = search(problem, incumbent, entrant)
    return EntryThreshold(None, found.n, found.monotone)


def _entry_threshold_table(params: Dict) -> Table:
    problem = params['problem']
    tau_i = scaled_tau(problem, params['tau_i'], params['tau_scale'])
    tau_e = scaled_tau(problem, params['tau_e'], params['tau_scale'])
    threshold = entry_threshold(
        problem, params['mode'], params['safety_model'], params['n_i'],
        tau_i, tau_e)
    quantities = market.threshold_params(problem, tau_i, tau_e)
    columns = ('mode', 'safety_model', 'gamma', 'delta', 'rho', 'nu',
               'nu_prime', 'lstar', 'n_i', 'tau_i', 'tau_e', 'g_i', 'g_e',
               'd', 'n_e_star', 'regime', 'monotone')
    row = (params['mode'], params['safety_model'], problem.gamma,
           problem.delta, problem.rho, problem.nu, problem.nu_prime,
           quantities.lstar, params['n_i'], tau_i, tau_e, quantities.g_i,
           quantities.g_e, quantities.d, threshold.value, threshold.regime,
           threshold.monotone)
    return columns, [row]


def _validate_table(params: Dict) -> Table:
    problem, cfg = params['problem'], params['config']
    report = validate(problem, cfg, params['trials'], params['seed'],
                      params['p_sim'])
    stats = report.stats
    columns = ('gamma', 'delta', 'rho', 'n', 'alpha', 'lambda', 'p_sim',
               'trials', 'seed', 'mc_l1', 'mc_l1_stderr', 'mc_l2',
               'mc_l2_stderr', 'det_l1', 'det_l2', 'sampled_det_l1',
               'sampled_det_l2')
    row = (problem.gamma, problem.delta, problem.rho, cfg.n, cfg.alpha,
           cfg.lam, params['p_sim'], stats.trials, stats.seed,
           stats.mean_l1, stats.stderr_l1, stats.mean_l2, stats.stderr_l2,
           report.expected_l1.value, report.expected_l2.value,
           report.sampled_l1, report.sampled_l2)
    return columns, [row]


def warmup_panels(p_trunc: int) -> Dict[str, Table]:
    """ Threshold against an infinite-data incumbent as tau_I / L* grows,
    across nu at rho = 0.5 and across rho at nu = 0.34. """
    columns = ('nu', 'rho', 'tau_i_rel', 'g_i', 'n_e_star')

    def rows(pairs):
        for nu, rho in pairs:
            problem = problem_for_nu(nu, rho, p_trunc)
            for tau_rel in WARMUP_TAU_RELS:
                tau = tau_rel * lstar(problem)
                yield (nu, rho, tau_rel,
                       market.infinite_data_loss(problem, tau),
                       market.threshold_warmup(problem, tau))

    return {
        'warmup_nu.csv': (columns, rows(
            [(nu, SWEEP_RHO) for nu in WARMUP_NUS])),
        'warmup_rho.csv': (columns, rows(
            [(SWEEP_NU, rho) for rho in WARMUP_RHOS])),
    }


def scaling_panels(p_trunc: int) -> Dict[str, Table]:
    """ Exact optimum and asymptotic form of the loss (delta = 0.5) and of
    the excess loss (delta = 2.5) against N at alpha = 0.9. """
    sizes = n_grid(*SCALING_N_GRID)
    loss_problem = make_power_law(0.5, 0.5, SWEEP_RHO, p_trunc)
    excess_problem = make_power_law(
        CONSTRAINED_GAMMA, CONSTRAINED_DELTA, SWEEP_RHO, p_trunc)
    return {
        'scaling_loss.csv': (CURVE_COLUMNS, _curve_rows(
            loss_problem, 'loss', SCALING_ALPHA, sizes)),
        'scaling_excess.csv': (CURVE_COLUMNS, _curve_rows(
            excess_problem, 'excess', SCALING_ALPHA, sizes)),
    }


def finite_panels(p_trunc: int) -> Dict[str, Table]:
    """ Threshold against an incumbent with N_I points at
    tau_I = 0.49 L*, across nu and across rho. """
    columns = ('nu', 'rho', 'tau_i_rel', 'n_i', 'n_e_star', 'regime')
    sizes = n_grid(*FINITE_N_GRID)

    def rows(pairs):
        for nu, rho in pairs:
            problem = problem_for_nu(nu, rho, p_trunc)
            tau = FINITE_TAU_REL * lstar(problem)
            for n_i in sizes:
                regime, value = market.threshold_finite(problem, n_i, tau)
                yield nu, rho, FINITE_TAU_REL, n_i, value, regime

    return {
        'finite_nu.csv': (columns, rows(
            [(nu, SWEEP_RHO) for nu in FINITE_NUS])),
        'finite_rho.csv': (columns, rows(
            [(SWEEP_NU, rho) for rho in FINITE_RHOS])),
    }


def constrained_panels(p_trunc: int) -> Dict[str, Table]:
    """ Threshold against an infinite-data incumbent at tau_I = 0.5625 L*
    as the entrant's looser constraint widens the gap D, across nu and for
    delta = 2.5 where the third regime exists. """
    columns = ('gamma', 'delta', 'rho', 'nu', 'nu_prime', 'tau_i_rel',
               'tau_e_rel', 'd', 'n_e_star', 'regime')

    def rows(problems):
        for problem in problems:
            best = lstar(problem)
            tau_i = CONSTRAINED_TAU_I_REL * best
            for tau_e_rel in CONSTRAINED_TAU_E_RELS:
                tau_e = tau_e_rel * best
                regime, value = market.threshold_constrained(
                    problem, tau_i, tau_e)
                quantities = market.threshold_params(problem, tau_i, tau_e)
                yield (problem.gamma, problem.delta, problem.rho, problem.nu,
                       problem.nu_prime, CONSTRAINED_TAU_I_REL, tau_e_rel,
                       quantities.d, value, regime)

    return {
        'constrained_nu.csv': (columns, rows(
            problem_for_nu(nu, SWEEP_RHO, p_trunc)
            for nu in CONSTRAINED_NUS)),
        'constrained_delta.csv': (columns, rows([make_power_law(
            CONSTRAINED_GAMMA, CONSTRAINED_DELTA, SWEEP_RHO, p_trunc)])),
    }


FIGURES: Dict[str, Callable[[int], Dict[str, Table]]] = {
    'warmup': warmup_panels,
    'scaling': scaling_panels,
    'finite': finite_panels,
    'constrained': constrained_panels,
}


def _figures(params: Dict) -> List[Path]:
    directory = Path(params['output_dir'])
    directory.mkdir(parents=True, exist_ok=True)
    which = FIGURES if params['which'] == 'all' else [params['which']]
    written = []
    for name in which:
        for filename, table in FIGURES[name](params['p_trunc']).items():
            path = directory / filename
            write_table(path, f'figures {name}',
                        {'p_trunc': params['p_trunc'], 'panel': filename},
                        table)
            written.append(path)
    return written


TABLES: Dict[str, Callable[[Dict], Table]] = {
    'kappa': _kappa_table,
    'detequiv': _detequiv_table,
    'scaling-curve': _scaling_curve_table,
    'entry-threshold': _entry_threshold_table,
    'validate': _validate_table,
}


def run(config: ExperimentConfig, stream: Optional[TextIO] = None) -> int:
    """ Validates the parameters, evaluates the subcommand and writes its
    CSV. Validation problems raise ConfigError; numerical failures
    propagate after any partial output file is removed.
    :return: 0 on success. """
    parameters = dict(config.parameters)
    if config.subcommand == 'validate':
        parameters.setdefault('seed', config.seed)
    if config.subcommand == 'figures' and config.output_path is not None:
        parameters.setdefault('output_dir', str(config.output_path))
    params = validated_parameters(config.subcommand, parameters)
    logger.debug('running %s with %r', config.subcommand, params)

    if config.subcommand == 'figures':
        _figures(params)
        return 0
    write_table(config.output_path, config.subcommand, params,
                TABLES[config.subcommand](params), stream)
    return 0
