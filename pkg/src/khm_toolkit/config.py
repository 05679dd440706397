"""
Configuration management for the knowing-how toolkit.
"""

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from dotenv import load_dotenv

LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL")
LOG_FORMATS = ("text", "json")
COLOR_MODES = ("never", "auto")


@dataclass
class LogConfig:
    """Logging configuration."""
    level: str = "WARNING"
    format: str = "text"
    file_path: Optional[Path] = None


@dataclass
class OutputConfig:
    """Terminal output configuration."""
    color: str = "auto"


@dataclass
class SearchConfig:
    """Countermodel search and fuzzing defaults."""
    countermodel_budget: int = 2_000_000
    fuzz_workers: int = 1
    fuzz_trials: int = 1000
    fuzz_seed: int = 42


@dataclass
class ProofConfig:
    """Proof checking configuration."""
    cache_path: Optional[Path] = None
    corpus_manifest: Optional[Path] = None


@dataclass
class Config:
    """Main configuration container."""
    log: LogConfig
    output: OutputConfig
    search: SearchConfig
    proof: ProofConfig


def load_config(env_path: Optional[str] = None) -> Config:
    """
    Load configuration from environment variables.

    Args:
        env_path: Optional path to .env file

    Returns:
        Config object with all settings

    Raises:
        ValueError: If a variable has an invalid value
    """
    # Load .env file if it exists
    if env_path:
        if not Path(env_path).exists():
            raise ValueError(f"Configuration file not found: {env_path}")
        load_dotenv(env_path)
    else:
        for path in [".env", Path.home() / ".khm_toolkit" / ".env"]:
            if Path(path).exists():
                load_dotenv(path)
                break

    def get_choice(key: str, default: str, choices: tuple, upper: bool = False) -> str:
        value = os.getenv(key, default).strip()
        value = value.upper() if upper else value.lower()
        if value not in choices:
            raise ValueError(f"Invalid value for {key}: {value!r} (expected one of {choices})")
        return value

    def get_int(key: str, default: int, minimum: int) -> int:
        raw = os.getenv(key)
        if raw is None or raw.strip() == "":
            return default
        try:
            value = int(raw)
        except ValueError:
            raise ValueError(f"Invalid integer for {key}: {raw!r}") from None
        if value < minimum:
            raise ValueError(f"{key} must be at least {minimum}, got {value}")
        return value

    def get_path(key: str) -> Optional[Path]:
        raw = os.getenv(key)
        if not raw:
            return None
        return Path(os.path.expanduser(raw))

    log = LogConfig(
        level=get_choice("KHM_LOG_LEVEL", "WARNING", LOG_LEVELS, upper=True),
        format=get_choice("KHM_LOG_FORMAT", "text", LOG_FORMATS),
        file_path=get_path("KHM_LOG_FILE"),
    )

    output = OutputConfig(color=get_choice("KHM_COLOR", "auto", COLOR_MODES))

    search = SearchConfig(
        countermodel_budget=get_int("KHM_COUNTERMODEL_BUDGET", 2_000_000, 1),
        fuzz_workers=get_int("KHM_FUZZ_WORKERS", 1, 1),
        fuzz_trials=get_int("KHM_FUZZ_TRIALS", 1000, 1),
        fuzz_seed=get_int("KHM_FUZZ_SEED", 42, 0),
    )

    proof = ProofConfig(
        cache_path=get_path("KHM_PROOF_CACHE"),
        corpus_manifest=get_path("KHM_CORPUS_MANIFEST"),
    )

    return Config(log=log, output=output, search=search, proof=proof)


def ensure_directories(config: Config) -> None:
    """Ensure directories for configured files exist."""
    for path in (config.log.file_path, config.proof.cache_path):
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
