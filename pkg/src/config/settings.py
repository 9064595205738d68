"""
Configuration settings for the qubitdyne simulator.
"""
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        env_prefix="QUBITDYNE_",
        case_sensitive=False
    )

    # Application Configuration
    log_level: str = "INFO"
    log_directory: str = "./logs"
    output_directory: str = "./data/runs"
    show_progress: bool = False

    # Execution Configuration
    workers: int = 4
    default_seed: int = 20240601

    # Fock Space Configuration
    n_fock: int = 30
    pe_n_fock: int = 1024

    # Statistics Configuration
    ks_grid_points: int = 4001

    # Tomography Configuration
    tomography_bin_width: float = 0.1
    tomography_max_iter: int = 2000
    tomography_tol: float = 1e-7


# Global settings instance
settings = Settings()
