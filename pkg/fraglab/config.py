from typing import Optional
from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Engine limits
    max_basis_states: int = 5_000_000
    full_space_max_atoms: int = 16
    dense_max_dim: int = 4096

    # Krylov propagator
    krylov_dim: int = 30
    krylov_tolerance: float = 1e-12
    krylov_max_halvings: int = 24

    # Parallelism
    threads: int = 1

    # Logging
    log_level: str = "INFO"
    log_json: bool = False

    # Command line defaults
    default_seed: int = 20240901
    output_dir: str = "./runs"
    git_describe: Optional[str] = None

    class Config:
        env_file = ".env"
        env_prefix = "FRAGLAB_"
        case_sensitive = False


# Global settings instance
settings = Settings()
