"""
Accessors for the RATE_LEAKAGE settings block.

Priority everywhere: explicit argument > Django setting (environment-backed) > built-in default.
"""

from typing import Any, Optional

DEFAULTS: dict[str, Any] = {
    "UNITS": "bits",
    "SEED": 42,
    "MC_SAMPLES": 200_000,
    "MC_BATCHES": 20,
    "SWEEP_WORKERS": 4,
    "EXPLICIT_MAX_K": 400,
}


def get_setting(name: str, override: Optional[Any] = None) -> Any:
    """Get a RATE_LEAKAGE setting, preferring an explicit override."""
    if override is not None:
        return override
    try:
        from django.conf import settings

        configured = getattr(settings, "RATE_LEAKAGE", {}) or {}
        if name in configured:
            return configured[name]
    except Exception:
        # Settings may not be configured when the services are used as a plain library
        pass
    return DEFAULTS[name]


def get_default_units() -> str:
    return str(get_setting("UNITS"))


def get_default_seed() -> int:
    return int(get_setting("SEED"))


def get_mc_samples() -> int:
    return int(get_setting("MC_SAMPLES"))


def get_mc_batches() -> int:
    return int(get_setting("MC_BATCHES"))


def get_sweep_workers() -> int:
    return max(1, int(get_setting("SWEEP_WORKERS")))


def get_explicit_max_k() -> int:
    return int(get_setting("EXPLICIT_MAX_K"))
