"""
Configuration loader for the OVID toolkit.
Loads settings from .env / environment and the versioned data files in config/.
"""

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, List

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from ovid.errors import UsageError

logger = logging.getLogger(__name__)

DEFAULT_CONFIG_DIR = Path(__file__).resolve().parent.parent / "config"


class Settings(BaseSettings):
    """Application settings loaded from .env file"""

    model_config = SettingsConfigDict(
        env_file=".env", case_sensitive=False, populate_by_name=True, extra="ignore"
    )

    # Worker parallelism
    threads: int = Field(default=os.cpu_count() or 1, ge=1, alias="OVID_THREADS")

    # Data files
    config_dir: str = Field(default=str(DEFAULT_CONFIG_DIR), alias="OVID_CONFIG_DIR")

    # Feature toggles
    top12_mode: str = Field(default="additions", alias="OVID_TOP12_MODE")

    # Logging
    log_level: str = Field(default="INFO", alias="LOG_LEVEL")
    environment: str = Field(default="production", alias="ENVIRONMENT")


class ConfigLoader:
    """Loads and manages all configuration files"""

    def __init__(self, config_dir: str | Path | None = None):
        self.config_dir = Path(config_dir) if config_dir else Path(settings.config_dir)
        self.editors_file = self.config_dir / "editors.json"
        self.map_features_file = self.config_dir / "map_features.json"
        self.default_config_file = self.config_dir / "ovid_default.conf"

    def load_editor_vocabulary(self) -> Dict[str, Any]:
        """Load the editor vocabulary from editors.json"""
        with open(self.editors_file, "r", encoding="utf-8") as f:
            data = json.load(f)
        slots = data.get("slots", [])
        if not slots or slots[-1]["name"] != "other":
            raise UsageError(f"{self.editors_file}: last editor slot must be 'other'")
        logger.debug(
            f"Loaded {len(slots)} editor slots",
            extra={"path": str(self.editors_file), "version": data.get("version")},
        )
        return data

    def load_map_features(self) -> List[Dict[str, Any]]:
        """Load the map-features validity list from map_features.json"""
        with open(self.map_features_file, "r", encoding="utf-8") as f:
            data = json.load(f)
        rows = data.get("features", [])
        logger.debug(
            f"Loaded {len(rows)} map-feature keys",
            extra={"path": str(self.map_features_file), "version": data.get("version")},
        )
        return rows

    def load_default_config(self) -> Dict[str, str]:
        """Load the default model configuration in key=value form"""
        if not self.default_config_file.exists():
            return {}
        return load_flat_config(self.default_config_file)


def load_flat_config(path: str | Path) -> Dict[str, str]:
    """
    Parse a flat key=value config file

    Blank lines and lines starting with '#' are ignored. Values stay strings;
    the caller validates them against the target model.
    """
    values: Dict[str, str] = {}
    with open(path, "r", encoding="utf-8") as f:
        for lineno, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{lineno}: expected key=value, got {line!r}")
            key, value = line.split("=", 1)
            values[key.strip()] = value.strip()
    return values


def canonical_hash(data: Any) -> str:
    """SHA-256 of the canonical JSON encoding of data"""
    encoded = json.dumps(data, sort_keys=True, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(encoded.encode("utf-8")).hexdigest()


# Global instances
settings = Settings()
config_loader = ConfigLoader()
