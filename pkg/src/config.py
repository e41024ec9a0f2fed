"""
Configuration for the PCRPO toolkit.
"""

from typing import List

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    """Process-level settings from environment variables."""

    # Output
    output_root: str = "runs"

    # Logging
    log_level: str = "info"
    log_json: bool = False

    # Parallel runs within a sweep
    jobs: int = 1

    # Seed suite used when a run document names none
    default_seeds: List[int] = [0, 1, 2, 3, 4]

    # Verification suites
    gradient_samples: int = 10_000
    gradient_dims: List[int] = [2, 8, 64]
    theorem_instances: int = 100

    class Config:
        env_prefix = "PCRPO_"


settings = Settings()
