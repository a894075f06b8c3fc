"""Process settings via environment variables."""

from __future__ import annotations

from pathlib import Path

from pydantic_settings import BaseSettings, SettingsConfigDict

__all__ = ["Settings"]


class Settings(BaseSettings):
    """Environment-level configuration; run hyperparameters live in RunConfig."""

    model_config = SettingsConfigDict(env_prefix="LAYOUTPRIOR_")

    # Root for relative dataset paths (COCO, CSQA, WinoGrande, synthetic corpora)
    data_root: Path = Path(".")

    # Logging
    log_level: str = "INFO"
    log_json: bool = True

    def resolve(self, path: str | Path) -> Path:
        """Resolve *path* against data_root unless it is absolute."""
        candidate = Path(path)
        if candidate.is_absolute():
            return candidate
        return self.data_root / candidate
