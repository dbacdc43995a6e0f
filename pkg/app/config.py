"""
Runtime settings for the grid threat toolkit.

Values are read from environment variables prefixed with ``GRIDTHREAT_``
(for example ``GRIDTHREAT_LOG=INFO``) and can be overridden per run by CLI flags.
"""

from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Numerical tolerances and runtime defaults."""

    model_config = SettingsConfigDict(env_prefix="GRIDTHREAT_", extra="ignore")

    log: str = Field("WARNING", description="Log level name")
    flow_tolerance: float = Field(1e-6, gt=0, description="Balance / limit tolerance (pu)")
    residual_tolerance: float = Field(1e-8, gt=0, description="Linear solve residual acceptance (pu)")
    islanding_tolerance: float = Field(1e-9, gt=0, description="LODF denominator threshold")
    stealth_tolerance: float = Field(1e-9, gt=0, description="Residual invariance tolerance")
    overload_epsilon: float = Field(1e-6, gt=0, description="Strict-overload margin (pu)")
    tau_scale: float = Field(1e-4, gt=0, description="Default BDD threshold per sqrt(measurement)")
    max_enumerated_generators: int = Field(12, ge=1, description="Commitment enumeration limit")
    workers: int = Field(1, ge=1, description="Default worker pool size")


@lru_cache
def get_settings() -> Settings:
    """Return the process-wide settings instance."""
    return Settings()
