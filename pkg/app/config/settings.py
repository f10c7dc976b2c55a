from enum import Enum
from typing import Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class Precision(str, Enum):
    """Working dtype of the tensor engine."""
    FLOAT32 = "float32"   # training runs
    FLOAT64 = "float64"   # oracle and gradient tests


class AppSettings(BaseModel):
    '''Application specific settings'''
    name: str = Field(default="transda", description="Application name")
    version: str = Field(default="0.1.0", description="Application version")


class RuntimeSettings(BaseSettings):
    threads: Optional[int] = Field(None, ge=1, description="Cap on internal parallelism; unset means single-threaded")
    precision: Precision = Field(Precision.FLOAT32, description="Tensor dtype for training")
    show_progress: bool = Field(True, description="tqdm progress bars on interactive terminals")

    model_config = SettingsConfigDict(env_prefix="")

    @property
    def effective_threads(self) -> int:
        return self.threads or 1


class PathSettings(BaseSettings):

    output_dir: str = Field("runs", description="Default output directory")

    model_config = SettingsConfigDict(env_prefix="TRANSDA_")


class ObservabilitySettings(BaseSettings):

    log_level: str = Field("INFO", description="Application log level")

    @field_validator("log_level")
    @classmethod
    def validate_log_level(cls, v: str) -> str:
        valid_levels = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]
        if v.upper() not in valid_levels:
            raise ValueError(f"Log level must be one of {valid_levels}")
        return v.upper()

    model_config = SettingsConfigDict(env_prefix="")


class Settings(BaseSettings):

    # Environment
    environment: str = Field("development", description="Environment name")

    app: AppSettings = Field(default_factory=AppSettings)
    runtime: RuntimeSettings = Field(default_factory=RuntimeSettings)
    paths: PathSettings = Field(default_factory=PathSettings)
    observability: ObservabilitySettings = Field(default_factory=ObservabilitySettings)

    @field_validator("environment")
    @classmethod
    def validate_environment(cls, v: str) -> str:
        valid_envs = ["development", "staging", "production"]
        if v not in valid_envs:
            raise ValueError(f"Environment must be one of {valid_envs}")
        return v

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )


_settings: Optional[Settings] = None


def get_settings() -> Settings:
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reset_settings() -> None:
    """Drop the cached instance so the next call re-reads the environment."""
    global _settings
    _settings = None
