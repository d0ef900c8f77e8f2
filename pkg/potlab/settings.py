# potlab/settings.py

import os
from pathlib import Path

BASE_DIR = Path(__file__).resolve().parent.parent

SECRET_KEY = os.environ.get("POT_SECRET_KEY", "potlab-local-key")
DEBUG = bool(os.environ.get("POT_DEBUG"))
ALLOWED_HOSTS = []

INSTALLED_APPS = [
    'rest_framework',
    'app',
]

# Everything is file based; no database is configured.
DATABASES = {}

LANGUAGE_CODE = 'en-us'
TIME_ZONE = 'UTC'
USE_I18N = False
USE_TZ = True

DEFAULT_AUTO_FIELD = 'django.db.models.BigAutoField'

LOGGING = {
    "version": 1,
    "disable_existing_loggers": False,
    "formatters": {
        "simple": {
            "format": "{levelname} {asctime} {name}: {message}",
            "style": "{",
        },
    },
    "handlers": {
        "console": {
            "class": "logging.StreamHandler",
            "formatter": "simple",
        },
    },
    "loggers": {
        "app": {
            "handlers": ["console"],
            "level": "DEBUG" if DEBUG else "INFO",
            "propagate": False,
        },
    },
}

# Pooled time series settings
POT = {
    # representation
    "LEVELS": 4,
    "OPS": ("sum", "max", "d1", "d2"),
    "NORMALIZE_POT": False,
    "BOW_K": 400,
    "IFV_K": 10,
    "IFV_K_HIGH_DIM": 5,       # used when descriptors have n >= HIGH_DIM
    "HIGH_DIM": 1000,
    "RESEEDS": 10,
    "KMEANS_MAX_ITER": 100,
    "KMEANS_TOL": 1e-4,
    "GMM_MAX_ITER": 100,
    "GMM_TOL": 1e-5,
    "VARIANCE_FLOOR": 1e-4,    # fraction of the data variance
    "POSTERIOR_FLOOR": 1e-10,

    # descriptors
    "GRID": 5,
    "ORIENTATIONS": 8,
    "FLOW_LEVELS": 3,
    "FLOW_BLOCK": 8,
    "FLOW_RADIUS": 4,
    "FLOW_SIGMA": 1.0,         # Gaussian prefilter before each pyramid downsample
    "L1_PRECOMPUTED": True,

    # classifier / protocol
    "SVM_C": 100.0,
    "SMO_TOL": 1e-3,
    "SMO_MAX_ITER": 10 ** 6,
    "TRIALS": 100,
    "SPLIT_FRAC": 0.5,
    "SEED": int(os.environ.get("POT_SEED", 1)),
    "JOBS": int(os.environ.get("POT_JOBS", -1)),
}
