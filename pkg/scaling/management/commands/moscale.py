from pathlib import Path

from django.core.management.base import BaseCommand, CommandError

from scaling.experiment import ConfigError, ExperimentConfig, \
    read_config_file, run
from scaling.serializers import normalize_params

_PROBLEM = [
    (('--gamma',), 'Eigenvalue decay exponent.'),
    (('--delta',), 'Alignment decay exponent.'),
    (('--rho',), 'Correlation between the objectives, in [0, 1).'),
    (('--p', '--p-trunc'), 'Number of spectrum modes kept.'),
]

# subcommand -> (help, [(flags, help)])
SUBCOMMANDS = {
    'kappa': ('Solve the effective-regularizer fixed point.', [
        (('--gamma',), 'Eigenvalue decay exponent.'),
        (('--lambda',), 'Ridge regularizer, >= 0.'),
        (('--n',), 'Dataset size.'),
        (('--p', '--p-trunc'), 'Number of spectrum modes kept.'),
    ]),
    'detequiv': ('Evaluate the expected deterministic equivalent.',
                 _PROBLEM + [
                     (('--n',), 'Dataset size or inf.'),
                     (('--alpha',), 'Fraction of performance labels.'),
                     (('--lambda',), 'Ridge regularizer.'),
                     (('--objective',), 'l1 (performance) or l2 (safety).'),
                 ]),
    'scaling-curve': ('Optimally regularized loss against N.', _PROBLEM + [
        (('--objective',), 'loss or excess.'),
        (('--alpha',), 'Fraction of performance labels.'),
        (('--n-grid',), 'Geometric N grid as lo:hi:points.'),
    ]),
    'entry-threshold': ('Market-entry threshold of the entrant.',
                        _PROBLEM + [
                            (('--mode',),
                             'warmup, finite, constrained or search.'),
                            (('--safety-model',), 'simple or det.'),
                            (('--tau-scale',),
                             'lstar (thresholds relative to L*) or '
                             'absolute.'),
                            (('--tau-i',), 'Incumbent safety threshold.'),
                            (('--tau-e',), 'Entrant safety threshold.'),
                            (('--n-i',), 'Incumbent dataset size or inf.'),
                        ]),
    'validate': ('Compare Monte Carlo ridge losses with the deterministic '
                 'equivalents.', _PROBLEM + [
                     (('--n',), 'Dataset size.'),
                     (('--alpha',), 'Fraction of performance labels.'),
                     (('--lambda',), 'Ridge regularizer.'),
                     (('--p-sim',), 'Simulation dimension.'),
                     (('--trials',), 'Number of independent draws.'),
                     (('--seed',), 'Root seed.'),
                 ]),
    'figures': ('Write the CSV panels of the default figure sweeps.', [
        (('--which',), 'warmup, scaling, finite, constrained or all.'),
        (('--output-dir',), 'Directory for the panel CSVs.'),
        (('--p', '--p-trunc'), 'Number of spectrum modes kept.'),
    ]),
}


def _dest(flags) -> str:
    return flags[-1].lstrip('-').replace('-', '_')


class Command(BaseCommand):
    help = ('Deterministic equivalents, scaling laws and market-entry '
            'thresholds for multi-objective ridge regression.')

    def add_arguments(self, parser):
        subparsers = parser.add_subparsers(
            dest='subcommand', required=True, metavar='subcommand')
        for name, (text, flags) in SUBCOMMANDS.items():
            subparser = subparsers.add_parser(name, help=text)
            subparser.add_argument(
                '--config', help='File of key=value lines; flags win.')
            subparser.add_argument(
                '-o', '--output', help='CSV path, stdout when absent.')
            for option_strings, option_help in flags:
                subparser.add_argument(
                    *option_strings, dest=_dest(option_strings),
                    help=option_help)

    def handle(self, *args, **options):
        subcommand = options['subcommand']
        flags = SUBCOMMANDS[subcommand][1]
        try:
            parameters = {}
            if options.get('config'):
                parameters.update(read_config_file(Path(options['config'])))
            parameters.update(normalize_params(
                {_dest(option_strings): options.get(_dest(option_strings))
                 for option_strings, _ in flags}))
        except ConfigError as error:
            raise CommandError(str(error), returncode=2)

        output = options.get('output')
        config = ExperimentConfig(
            subcommand=subcommand, parameters=parameters,
            output_path=Path(output) if output else None)
        try:
            run(config, stream=self.stdout)
        except ConfigError as error:
            raise CommandError(str(error), returncode=2)
        except (ArithmeticError, RuntimeError, ValueError, OSError) as error:
            raise CommandError(f'{subcommand} failed: {error}', returncode=1)
