"""Numerical laboratory for collisionless dynamics in the trapping potential -|x|^2/2."""

from .core import (
    ConfigError,
    DecaySeries,
    GridField,
    PhasePoint,
    SimConfig,
    grid_scale,
    parse_config_file,
    validate_config,
)

__version__ = "0.1.0"
