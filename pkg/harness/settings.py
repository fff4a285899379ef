from pathlib import Path

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class HarnessSettings(BaseSettings):
    """Harness settings that are set using environment variables."""

    model_config = SettingsConfigDict(env_prefix="SKDV_")

    # Runs without an explicit output directory write below this one
    output_dir: Path = Path("runs")

    # Worker threads for ensemble paths. Outputs do not depend on this value.
    threads: int = Field(4, ge=1)

    log_level: str = "INFO"

    @field_validator("log_level", mode="before")
    def normalize_log_level(cls, log_level):
        return str(log_level).upper()


# Create HarnessSettings object
harness_settings = HarnessSettings()
