from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Process-wide defaults, read from SANDPILE_* variables or a .env file."""

    model_config = SettingsConfigDict(env_prefix="SANDPILE_", env_file=".env", extra="ignore")

    workers: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    oracle_bound: int = Field(default=4096, ge=1)
    working_exponent: int = Field(default=8, ge=1)
    exponent_ceiling: int = Field(default=64, ge=1)
    unsaturated_warning_rate: float = Field(default=0.01, ge=0, le=1)
    output_dir: Path = Path("runs")
    moment_tables_dir: Path = Path("moment_tables")


def get_settings() -> Settings:
    return Settings()
