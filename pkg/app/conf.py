# app/conf.py
"""
Access to the POT settings block with built-in defaults, in the manner of
``rest_framework.settings.api_settings``.
"""
from django.conf import settings
from django.core.signals import setting_changed

DEFAULTS = {
    "LEVELS": 4,
    "OPS": ("sum", "max", "d1", "d2"),
    "NORMALIZE_POT": False,
    "BOW_K": 400,
    "IFV_K": 10,
    "IFV_K_HIGH_DIM": 5,
    "HIGH_DIM": 1000,
    "RESEEDS": 10,
    "KMEANS_MAX_ITER": 100,
    "KMEANS_TOL": 1e-4,
    "GMM_MAX_ITER": 100,
    "GMM_TOL": 1e-5,
    "VARIANCE_FLOOR": 1e-4,
    "POSTERIOR_FLOOR": 1e-10,
    "GRID": 5,
    "ORIENTATIONS": 8,
    "FLOW_LEVELS": 3,
    "FLOW_BLOCK": 8,
    "FLOW_RADIUS": 4,
    "FLOW_SIGMA": 1.0,
    "L1_PRECOMPUTED": True,
    "SVM_C": 100.0,
    "SMO_TOL": 1e-3,
    "SMO_MAX_ITER": 10 ** 6,
    "TRIALS": 100,
    "SPLIT_FRAC": 0.5,
    "SEED": 1,
    "JOBS": -1,
}


class PotSettings:
    def __init__(self, defaults=None):
        self.defaults = defaults or DEFAULTS
        self._cached = set()

    @property
    def user_settings(self):
        if not hasattr(self, "_user_settings"):
            self._user_settings = getattr(settings, "POT", {})
        return self._user_settings

    def __getattr__(self, attr):
        if attr not in self.defaults:
            raise AttributeError(f"Invalid POT setting: '{attr}'")
        value = self.user_settings.get(attr, self.defaults[attr])
        self._cached.add(attr)
        setattr(self, attr, value)
        return value

    def reload(self):
        for attr in self._cached:
            delattr(self, attr)
        self._cached.clear()
        if hasattr(self, "_user_settings"):
            delattr(self, "_user_settings")


pot_settings = PotSettings(DEFAULTS)


def reload_pot_settings(*args, **kwargs):
    if kwargs["setting"] == "POT":
        pot_settings.reload()


setting_changed.connect(reload_pot_settings)
