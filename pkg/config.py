# config.py
# Central configuration file for a11yfix.

import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Dict, Optional

import yaml
from dotenv import load_dotenv
from pydantic import ValidationError

from errors import ConfigError
from schemas import RunConfig

# Load environment variables from the .env file
load_dotenv()

logger = logging.getLogger(__name__)

# --- Directory Configuration ---
# Use the current file's location to define the base path
BASE_DIR = Path(__file__).resolve().parent
DATA_DIR = BASE_DIR / "data"

RULE_CATALOG_PATH = DATA_DIR / "rule_catalog.yaml"
PRICE_TABLE_PATH = DATA_DIR / "prices.yaml"
PROMPTS_PATH = DATA_DIR / "prompts.yaml"

# Dataset layout (two directories, paired by filename)
VIOLATED_DIRNAME = "scraped_sites"
FIXED_DIRNAME = "scraped_sites_fixed"

# --- Secrets and environment ---
# The API key is only ever read from the environment, never from the YAML config
API_KEY_ENV = "A11YFIX_API_KEY"
LOG_LEVEL = os.getenv("A11YFIX_LOG_LEVEL", "INFO").upper()
LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
MAX_DOCUMENT_BYTES = int(os.getenv("A11YFIX_MAX_DOCUMENT_BYTES", str(5 * 1024 * 1024)))

FROZEN_TIMESTAMP = datetime(1970, 1, 1, tzinfo=timezone.utc)

_SECRET_KEYS = {"api_key", "apikey", "key", "token", "secret", "password"}


def get_api_key() -> Optional[str]:
    return os.getenv(API_KEY_ENV)


def make_clock(freeze: bool) -> Callable[[], datetime]:
    """Return the timestamp source for a run; frozen clocks always answer the epoch."""
    if freeze:
        return lambda: FROZEN_TIMESTAMP
    return lambda: datetime.now(timezone.utc)


def _reject_secrets(data: Dict[str, Any], where: str = "") -> None:
    for key, value in data.items():
        if str(key).lower() in _SECRET_KEYS:
            raise ConfigError(
                f"Secret '{where}{key}' found in the config file; set {API_KEY_ENV} in the environment instead"
            )
        if isinstance(value, dict):
            _reject_secrets(value, where=f"{where}{key}.")


def load_run_config(path: Optional[Path] = None, overrides: Optional[Dict[str, Any]] = None) -> RunConfig:
    """
    Build the RunConfig for a command.

    Args:
        path: Optional YAML config file
        overrides: CLI values; None entries are ignored. Dotted keys ("provider.kind") reach nested settings.

    Returns:
        RunConfig: The validated configuration

    Raises:
        ConfigError: On unreadable YAML, secrets in the file, or invalid values
    """
    data: Dict[str, Any] = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"Config file not found: {path}")
        try:
            loaded = yaml.safe_load(path.read_text(encoding="utf-8"))
        except yaml.YAMLError as e:
            raise ConfigError(f"Could not parse config file {path}: {e}") from e
        if loaded is None:
            loaded = {}
        if not isinstance(loaded, dict):
            raise ConfigError(f"Config file {path} must contain a mapping")
        _reject_secrets(loaded)
        data = loaded

    for key, value in (overrides or {}).items():
        if value is None:
            continue
        if "." in key:
            section, field = key.split(".", 1)
            nested = data.setdefault(section, {})
            if not isinstance(nested, dict):
                raise ConfigError(f"Config section '{section}' must be a mapping")
            nested[field] = value
        else:
            data[key] = value

    try:
        run_config = RunConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid configuration: {e}") from e

    logger.debug(f"Loaded run configuration: {run_config.model_dump(mode='json')}")
    return run_config
