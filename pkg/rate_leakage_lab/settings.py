"""
Django settings for the rate_leakage_lab project.

The project has no web surface and no database; Django provides the
management-command CLI, settings and logging configuration.
"""

import os
from pathlib import Path

from dotenv import load_dotenv

# Build paths inside the project like this: BASE_DIR / 'subdir'.
BASE_DIR = Path(__file__).resolve().parent.parent

load_dotenv(BASE_DIR / ".env")

SECRET_KEY = os.environ.get(
    "DJANGO_SECRET_KEY",
    "rate-leakage-lab-insecure-local-key",
)

DEBUG = os.environ.get("DJANGO_DEBUG", "False").lower() in {"1", "true", "yes"}

ALLOWED_HOSTS: list[str] = []


# Application definition

INSTALLED_APPS = [
    'state_estimation',
]

# Persistence is out of scope; the dummy backend is enough for management commands.
DATABASES: dict = {}

LANGUAGE_CODE = 'en-us'

TIME_ZONE = 'UTC'

USE_I18N = False

USE_TZ = True


# Rate-distortion-leakage defaults
# Every value can be overridden from the environment (or .env) and, at run
# time, by the corresponding command-line flag.

RATE_LEAKAGE = {
    'UNITS': os.environ.get("RATE_LEAKAGE_UNITS", "bits"),
    'SEED': int(os.environ.get("RATE_LEAKAGE_SEED", "42")),
    'MC_SAMPLES': int(os.environ.get("RATE_LEAKAGE_MC_SAMPLES", "200000")),
    'MC_BATCHES': int(os.environ.get("RATE_LEAKAGE_MC_BATCHES", "20")),
    'SWEEP_WORKERS': int(os.environ.get("RATE_LEAKAGE_SWEEP_WORKERS", "4")),
    # Largest K for which explicit (1+2K)-dimensional covariances are built
    'EXPLICIT_MAX_K': int(os.environ.get("RATE_LEAKAGE_EXPLICIT_MAX_K", "400")),
}

# Logging Configuration
# Logs go to stderr so CSV written to stdout stays clean.
LOGGING = {
    'version': 1,
    'disable_existing_loggers': False,
    'formatters': {
        'verbose': {
            'format': '{levelname} {asctime} {module} {message}',
            'style': '{',
        },
    },
    'handlers': {
        'console': {
            'class': 'logging.StreamHandler',
            'formatter': 'verbose',
        },
    },
    'loggers': {
        'state_estimation': {
            'handlers': ['console'],
            'level': os.environ.get("RATE_LEAKAGE_LOG_LEVEL", "WARNING"),
            'propagate': True,
        },
    },
}
