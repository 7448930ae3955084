"""Configuration management for the simulation engine."""

import json
from pathlib import Path
from typing import Any, Dict, Optional

from pydantic import Field, ValidationError
from pydantic_settings import BaseSettings

from ..models.schemas import RunConfig
from .errors import ConfigurationError
from .logger import get_logger

logger = get_logger(__name__)

CONFIG_ECHO_NAME = "config.resolved.json"


class Settings(BaseSettings):
    """Process-level defaults loaded from environment variables."""

    # Logging Configuration
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")
    log_file: str = Field(default="logs/simulation.log", alias="LOG_FILE")

    # Run Defaults
    output_dir: str = Field(default="output", alias="OUTPUT_DIR")
    master_seed: int = Field(default=0, alias="MASTER_SEED")

    # Execution Configuration
    workers: int = Field(default=1, alias="WORKERS")
    ensemble_chunk_size: int = Field(default=256, alias="ENSEMBLE_CHUNK_SIZE")
    saved_trajectories: int = Field(default=10, alias="SAVED_TRAJECTORIES")

    class Config:
        env_file = ".env"
        env_file_encoding = "utf-8"
        case_sensitive = False


def get_settings() -> Settings:
    """Get application settings instance."""
    return Settings()


# Global settings instance
settings = get_settings()


def _deep_merge(base: Dict[str, Any], overrides: Dict[str, Any]) -> Dict[str, Any]:
    merged = dict(base)
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def format_validation_error(error: ValidationError) -> str:
    """Render a pydantic error as one 'field.path: message' line per problem."""
    lines = []
    for item in error.errors():
        path = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{path}: {item['msg']}")
    return "\n".join(lines)


def load_run_config(
    config_path: Optional[str] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> RunConfig:
    """
    Build a validated RunConfig from a JSON file plus CLI overrides.

    Args:
        config_path: Optional path to a JSON config file
        overrides: Nested dict of values that take precedence over the file

    Returns:
        Validated RunConfig

    Raises:
        ConfigurationError: If the file cannot be read or any field is invalid
    """
    data: Dict[str, Any] = {
        "seed": settings.master_seed,
        "output_dir": settings.output_dir,
        "ensemble": {
            "chunk_size": settings.ensemble_chunk_size,
            "saved_trajectories": settings.saved_trajectories,
        },
    }

    if config_path:
        path = Path(config_path)
        if not path.exists():
            raise ConfigurationError(f"Config file not found: {config_path}")
        try:
            file_data = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as e:
            raise ConfigurationError(f"Config file {config_path} is not valid JSON: {e}") from e
        if not isinstance(file_data, dict):
            raise ConfigurationError("Config file must contain a JSON object")
        data = _deep_merge(data, file_data)
        logger.info(f"Loaded config file {config_path}")

    if overrides:
        data = _deep_merge(data, overrides)

    try:
        config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid configuration:\n{format_validation_error(e)}") from e

    logger.debug(f"Resolved config: {config}")
    return config


def config_echo(config: RunConfig) -> Dict[str, Any]:
    """Resolved config as plain JSON data; output_dir is excluded so trees compare equal."""
    return config.model_dump(mode="json", exclude={"output_dir"})


def write_config_echo(config: RunConfig, out_dir: Path) -> Path:
    """
    Write the fully-resolved config next to the run outputs.

    Args:
        config: Resolved run config
        out_dir: Output directory

    Returns:
        Path of the echo file
    """
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / CONFIG_ECHO_NAME
    path.write_text(json.dumps(config_echo(config), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path
