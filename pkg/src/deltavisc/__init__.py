"""Vanishing-viscosity laboratory for the transaction-cost Black-Scholes Delta equation."""

from .config import ConfigError, RunConfig, load_config, parse_config
from .model import DomainParams, MarketParams, RegularizationParams
from .solver import solve

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "DomainParams",
    "MarketParams",
    "RegularizationParams",
    "RunConfig",
    "load_config",
    "parse_config",
    "solve",
]
