"""Small shared fixtures for the numerical suites."""
from mfsi.config.run_config import Config, GeometryConfig, PhysicsConfig
from mfsi.solver.grid import build_grid, build_operators

SMALL = {"n_h": 8, "n_zf": 8, "n_zs": 6}


def small_config(**geometry) -> Config:
    return Config(geometry=GeometryConfig(**{**SMALL, **geometry}))


def small_grid(**geometry):
    return build_grid(small_config(**geometry))


def small_operators(physics: PhysicsConfig = PhysicsConfig(), **geometry):
    grid = small_grid(**geometry)
    return grid, build_operators(grid, physics.mu_s, physics.lambda_s)
