"""
Django settings for the moscale project.

Numerical tunables live in MOSCALE and are read through scaling.conf; the
secret key, debug flag, thread count and log level come from the
environment.
"""

import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

# SECURITY WARNING: set DJANGO_SECRET_KEY outside development
SECRET_KEY = os.environ.get(
    'DJANGO_SECRET_KEY', 'django-insecure-moscale-development-only')

DEBUG = os.environ.get('DJANGO_DEBUG', '').lower() in ('1', 'true', 'yes')

ALLOWED_HOSTS = ['localhost', '127.0.0.1', 'testserver']


# Application definition

INSTALLED_APPS = [
    'rest_framework',
    'scaling',
]

MIDDLEWARE = [
    'django.middleware.security.SecurityMiddleware',
    'django.middleware.common.CommonMiddleware',
]

ROOT_URLCONF = 'moscale.urls'

WSGI_APPLICATION = 'moscale.wsgi.application'

# Nothing is persisted
DATABASES = {}

# Numerical settings, see scaling/conf.py for the full list of keys

MOSCALE = {
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
    'THREADS': os.environ.get('MOSCALE_THREADS'),
}


LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'simple': {
            'format': '{levelname} {name}: {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'simple',
        },
    },
    'loggers': {
        'scaling': {
            'handlers': ['console'],
            'level': os.environ.get('MOSCALE_LOG_LEVEL', 'WARNING').upper(),
            'propagate': False,
        },
    },
}


# Internationalization

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'
