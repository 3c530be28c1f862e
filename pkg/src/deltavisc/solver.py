"""Assemble a run from a :class:`RunConfig` and march it to expiry."""

from __future__ import annotations

import numpy as np

from .config import RunConfig
from .stepper import Trajectory, initial_profile, march

__all__ = ["solve"]


def solve(config: RunConfig, u0: np.ndarray | None = None) -> Trajectory:
    """March the smoothed payoff Delta (or ``u0``, if given) from t = 0 to T."""
    grid = config.build_grid()
    if u0 is None:
        u0 = initial_profile(grid, config.K, config.width)
    elif np.shape(u0) != grid.x.shape:
        raise ValueError("u0 does not match the grid")
    return march(
        u0,
        grid,
        config.market,
        config.eps,
        config.T,
        config.nt,
        tol=config.tol_newton,
        max_iter=config.max_iter,
        dt_out=config.dt_out,
    )
