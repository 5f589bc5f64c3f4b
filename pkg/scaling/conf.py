import os

from django.conf import settings
from django.core.exceptions import ImproperlyConfigured

DEFAULTS = {
    'P_TRUNC': 100_000,
    'P_SIM': 400,
    'KAPPA_TOL': 1e-12,
    'KAPPA_MAX_ITER': 200,
    'LAMBDA_MIN': 1e-8,
    'LAMBDA_MAX': 0.5,
    'LAMBDA_COARSE_POINTS': 33,
    'LAMBDA_DENSE_POINTS': 400,
    'GRID_LAMBDA_POINTS': 64,
    'GRID_ALPHA_POINTS': 51,
    'MAX_ENTRANT_N': 10 ** 12,
    'LINEAR_SCAN_LIMIT': 4096,
    'THREADS': None,
}


def get(name: str):
    """ Returns a MOSCALE setting, falling back to the built-in default when
    the key is absent or Django settings are not configured.
    :param name: Key in the MOSCALE settings dictionary. """
    try:
        overrides = getattr(settings, 'MOSCALE', {})
    except ImproperlyConfigured:
        overrides = {}
    return overrides.get(name, DEFAULTS[name])


def threads() -> int:
    """ Worker pool size; MOSCALE_THREADS in the environment wins over the
    settings value. """
    value = os.environ.get('MOSCALE_THREADS') or get('THREADS')
    if value is None:
        return os.cpu_count() or 1
    return max(1, int(value))
