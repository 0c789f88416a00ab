import os
from dataclasses import dataclass, replace
from typing import Optional

from dotenv import load_dotenv

from services.formula_core import EagError

_settings = None


class ConfigError(EagError):
    """An EAG_* environment variable holds an unusable value."""


@dataclass(frozen=True)
class Settings:
    budget: int = 20000
    max_degree: int = 12
    witness_depth: int = 24
    jobs: int = 1
    log_level: str = "INFO"

    def with_overrides(self, **overrides) -> "Settings":
        """Copy with every non-None override applied (command-line flags win over the environment)."""
        values = {k: v for k, v in overrides.items() if v is not None}
        return replace(self, **values)


def _int_env(name: str, default: int, *, minimum: int) -> int:
    raw = os.getenv(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {raw!r}")
    if value < minimum:
        raise ConfigError(f"{name} must be at least {minimum}, got {value}")
    return value


def load_settings() -> Settings:
    load_dotenv()
    level = os.getenv("EAG_LOG_LEVEL", "INFO").upper()
    if level not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
        raise ConfigError(f"EAG_LOG_LEVEL must be a logging level name, got {level!r}")
    return Settings(
        budget=_int_env("EAG_BUDGET", 20000, minimum=1),
        max_degree=_int_env("EAG_MAX_DEGREE", 12, minimum=1),
        witness_depth=_int_env("EAG_WITNESS_DEPTH", 24, minimum=0),
        jobs=_int_env("EAG_JOBS", 1, minimum=1),
        log_level=level,
    )


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = load_settings()
    return _settings


def set_settings(settings: Optional[Settings]) -> None:
    """Install settings for the process; ``None`` re-reads the environment on next use."""
    global _settings
    _settings = settings
