"""
Simulation Configuration
Numerical defaults for spectra, Arnoldi caging and sweeps, overridable from .env
"""

from functools import lru_cache

from dotenv import load_dotenv
from pydantic_settings import BaseSettings, SettingsConfigDict

load_dotenv()


class SimulationConfig(BaseSettings):
    """Numerical settings shared by the library and the command line."""

    # Tolerances
    unitarity_tol: float = 1e-10
    spectrum_match_tol: float = 1e-9
    arnoldi_tol: float = 1e-8
    leak_tol: float = 1e-9
    period_tol: float = 1e-8
    amplitude_floor: float = 1e-12
    pinch_tol: float = 1e-6

    # Cage dynamics
    max_period: int = 200
    verify_steps: int = 1000

    # Butterfly sampling
    dc_flux_points: int = 512
    dc_k_points: int = 256
    t3_q_max: int = 30
    t3_k_points: int = 8

    # Runtime
    threads: int = 1
    log_level: str = "INFO"

    model_config = SettingsConfigDict(env_file=".env", env_prefix="QWCAGE_", case_sensitive=False, extra="ignore")


@lru_cache()
def get_simulation_config() -> SimulationConfig:
    """
    Get cached simulation configuration instance.

    Returns:
        SimulationConfig: Process-wide numerical settings
    """
    return SimulationConfig()
