from .run_config import (
    Config,
    DiscretizationConfig,
    ForcingConfig,
    GeometryConfig,
    PhysicsConfig,
    SolverConfig,
    load_config,
)
from .settings import AppSettings, get_settings

__all__ = [
    "AppSettings",
    "Config",
    "DiscretizationConfig",
    "ForcingConfig",
    "GeometryConfig",
    "PhysicsConfig",
    "SolverConfig",
    "get_settings",
    "load_config",
]
