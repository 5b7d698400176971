"""
Django settings for TNZ_CORE project.

The project has no database, HTTP surface or admin site; Django provides the
settings layer, logging configuration and the management-command CLI.

Every value below can be overridden from the environment or a `.env` file.
"""
from pathlib import Path
from decouple import config

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

# Only used by Django internals; the CLI signs nothing
SECRET_KEY = config('SECRET_KEY', default='tnz-local-cli')

DEBUG = config('DEBUG', default=False, cast=bool)


# Application definition

INSTALLED_APPS = [
    # Third party apps
    'rest_framework',

    # Local apps
    'tensors.apps.TensorsConfig',
    'networks.apps.NetworksConfig',
    'decompositions.apps.DecompositionsConfig',
    'layers.apps.LayersConfig',
    'stacks.apps.StacksConfig',
    'tensorized.apps.TensorizedConfig',
    'containers.apps.ContainersConfig',
]

DATABASES = {}

USE_I18N = False

USE_TZ = True

TIME_ZONE = 'UTC'


# Django REST framework: serializers validate container manifests and the
# JSON renderer/parser read and write them

REST_FRAMEWORK = {
    'STRICT_JSON': True,
    'UNICODE_JSON': False,
    'COMPACT_JSON': True,
}


# Tensor network settings

# Fallback for every --seed flag
TNZ_SEED = config('TNZ_SEED', default=None, cast=lambda v: None if v in (None, '') else int(v))

# Significant digits of numeric CLI report fields
TNZ_REPORT_DIGITS = config('TNZ_REPORT_DIGITS', default=12, cast=int)

# Planner strategy used when --strategy is omitted
TNZ_DEFAULT_STRATEGY = config('TNZ_DEFAULT_STRATEGY', default='greedy')

# Max abs difference accepted by `verify --reference`
TNZ_VERIFY_ATOL = config('TNZ_VERIFY_ATOL', default=1e-10, cast=float)

# Threads used by `forward --batch` chunking
TNZ_CHUNK_WORKERS = config('TNZ_CHUNK_WORKERS', default=1, cast=int)

TNZ_LOG_LEVEL = config('TNZ_LOG_LEVEL', default='WARNING')

TNZ_APPS = ['tensors', 'networks', 'decompositions', 'layers', 'stacks', 'tensorized', 'containers']

LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'plain': {
            'format': '%(asctime)s %(levelname)s %(name)s: %(message)s',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'plain',
            'stream': 'ext://sys.stderr',
        },
    },
    'loggers': {
        app: {
            'handlers': ['console'],
            'level': TNZ_LOG_LEVEL,
            'propagate': False,
        }
        for app in TNZ_APPS + ['TNZ_CORE']
    },
}
