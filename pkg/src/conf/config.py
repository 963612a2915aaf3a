from typing import Any

from pydantic import ConfigDict, field_validator
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    IGA_SPECTRA_THREADS: int | None = None
    EIG_MAX_DOF: int = 2500
    INSTABILITY_THRESHOLD: float = 1e6
    OUTPUT_DIR: str = "results"
    LOG_LEVEL: str = "INFO"
    DEFAULT_GAMMA: float = 0.5
    DEFAULT_C0: float = 1.0
    CSV_FLOAT_FORMAT: str = "%.17g"
    API_HOST: str = "0.0.0.0"
    API_PORT: int = 8000

    @field_validator("LOG_LEVEL")
    @classmethod
    def validate_log_level(cls, v: Any):
        v = str(v).upper()
        if v not in ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]:
            raise ValueError("log level must be DEBUG, INFO, WARNING, ERROR or CRITICAL")
        return v

    @field_validator("IGA_SPECTRA_THREADS")
    @classmethod
    def validate_threads(cls, v: Any):
        if v is not None and v < 1:
            raise ValueError("worker count must be at least 1")
        return v

    model_config = ConfigDict(extra='ignore', env_file=".env",
                              env_file_encoding="utf-8")  # noqa


config = Settings()
