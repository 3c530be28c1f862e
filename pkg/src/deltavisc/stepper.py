"""Backward-Euler time marching with Newton iteration and a Picard fallback."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_banded

from .model import MarketParams, diffusion_coeff
from .payoff import smoothed_profile
from .spatial import LEFT_VALUE, RIGHT_VALUE, Grid, SolutionField, jacobian, semidiscrete_rhs

log = logging.getLogger(__name__)

__all__ = [
    "StepFailure",
    "StepInfo",
    "Trajectory",
    "step_implicit",
    "march",
    "MonotonicityReport",
    "monotonicity_report",
]

MAX_HALVINGS = 10
MONOTONE_TOL = 1e-8


class StepFailure(RuntimeError):
    """Newton and Picard both failed to reach the residual tolerance."""


@dataclass
class StepInfo:
    t: float
    dt: float
    newton_iters: int
    picard_iters: int
    residual: float
    halvings: int = 0
    min_slope: float = 0.0


@dataclass
class Trajectory:
    grid: Grid
    times: np.ndarray
    values: np.ndarray  # (n_snapshots, n_nodes)
    dt: float
    steps: list[StepInfo] = field(default_factory=list)

    @property
    def snapshots(self) -> list[SolutionField]:
        return [SolutionField(v, float(t)) for t, v in zip(self.times, self.values)]

    @property
    def final(self) -> SolutionField:
        return SolutionField(self.values[-1], float(self.times[-1]))

    @property
    def halvings(self) -> int:
        return sum(1 for s in self.steps if s.halvings > 0)

    def thinned(self, dt_out: float) -> "Trajectory":
        """Subsample to a ``dt_out`` cadence, keeping the first and last snapshot."""
        if dt_out <= 0 or self.times.size <= 2:
            return self
        spacing = self.times[1] - self.times[0]
        stride = max(1, int(round(dt_out / spacing)))
        idx = list(range(0, self.times.size, stride))
        if idx[-1] != self.times.size - 1:
            idx.append(self.times.size - 1)
        return Trajectory(self.grid, self.times[idx], self.values[idx], self.dt, self.steps)


def _pin(u: np.ndarray) -> np.ndarray:
    u = np.array(u, dtype=float)
    u[0] = LEFT_VALUE
    u[-1] = RIGHT_VALUE
    return u


def _residual(u, u_old, t, dt, grid, params, eps):
    G = u - u_old - dt * semidiscrete_rhs(u, t, grid, params, eps)
    G[0] = u[0] - LEFT_VALUE
    G[-1] = u[-1] - RIGHT_VALUE
    return G


def _system(J: np.ndarray, dt: float) -> np.ndarray:
    A = -dt * J
    A[1] += 1.0
    return A


def _picard_matrix(u, t, dt, grid, params, eps):
    # a0 frozen at u: flux_j = a0_j * s_j is linear in the unknown
    s = np.diff(u) / grid.dx
    frozen = diffusion_coeff(grid.faces, t, s, params, eps)
    g = frozen / grid.dx
    vol = grid.volumes
    x, dx = grid.x, grid.dx
    upper = g[1:] / vol
    lower = g[:-1] / vol
    diag = -(g[1:] + g[:-1]) / vol - params.q
    c = (params.r - params.q) * x[1:-1]
    pos = c >= 0
    upper = upper + np.where(pos, c / dx[1:], 0.0)
    diag = diag + np.where(pos, -c / dx[1:], c / dx[:-1])
    lower = lower + np.where(pos, 0.0, -c / dx[:-1])
    J = np.zeros((3, u.size))
    J[0, 2:] = upper
    J[1, 1:-1] = diag
    J[2, :-2] = lower
    return _system(J, dt)


def step_implicit(
    u_old: np.ndarray,
    t_old: float,
    dt: float,
    grid: Grid,
    params: MarketParams,
    eps: float,
    tol: float = 1e-10,
    max_iter: int = 30,
) -> tuple[np.ndarray, StepInfo]:
    """One backward-Euler step ``u - u_old - dt * rhs(u, t_old + dt) = 0``.

    Newton updates are halved (up to 20 times) while the residual max-norm
    does not decrease; each such iteration counts as a failure.  After
    ``max_iter // 2`` failures, or ``max_iter`` iterations without
    convergence, the step falls back to Picard sweeps with the diffusion
    coefficient frozen at the latest iterate.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    t = t_old + dt
    u_old = np.asarray(u_old, dtype=float)
    u = _pin(u_old)
    G = _residual(u, u_old, t, dt, grid, params, eps)
    res = float(np.max(np.abs(G)))
    iters = failures = 0
    while res > tol and iters < max_iter and failures < max(1, max_iter // 2):
        A = _system(jacobian(u, t, grid, params, eps), dt)
        A[1, 0] = A[1, -1] = 1.0
        delta = solve_banded((1, 1), A, -G, check_finite=False)
        iters += 1
        lam = 1.0
        for _ in range(20):
            trial = u + lam * delta
            G_trial = _residual(trial, u_old, t, dt, grid, params, eps)
            res_trial = float(np.max(np.abs(G_trial)))
            if res_trial < res or res_trial <= tol:
                break
            lam *= 0.5
        if lam < 1.0:
            failures += 1
        if not (res_trial < res or res_trial <= tol):
            break
        u, G, res = trial, G_trial, res_trial

    picard = 0
    if res > tol:
        log.debug("Newton stalled at t=%.6g (res=%.3e); switching to Picard", t, res)
        for _ in range(max_iter):
            A = _picard_matrix(u, t, dt, grid, params, eps)
            A[1, 0] = A[1, -1] = 1.0
            rhs = u_old.copy()
            rhs[0], rhs[-1] = LEFT_VALUE, RIGHT_VALUE
            u = solve_banded((1, 1), A, rhs, check_finite=False)
            picard += 1
            G = _residual(u, u_old, t, dt, grid, params, eps)
            res = float(np.max(np.abs(G)))
            if not np.isfinite(res):
                break
            if res <= tol:
                break
    if not res <= tol:
        raise StepFailure(f"nonlinear solve failed at t={t:.6g}, dt={dt:.3g} (residual {res:.3e})")
    info = StepInfo(
        t=t,
        dt=dt,
        newton_iters=iters,
        picard_iters=picard,
        residual=res,
        min_slope=float(np.min(np.diff(u))),
    )
    return u, info


def _advance(u, t, dt, grid, params, eps, tol, max_iter, depth, infos):
    try:
        u_new, info = step_implicit(u, t, dt, grid, params, eps, tol, max_iter)
    except StepFailure:
        if depth >= MAX_HALVINGS:
            raise
        log.info("halving dt=%.3g at t=%.6g", dt, t)
        half = 0.5 * dt
        u_mid = _advance(u, t, half, grid, params, eps, tol, max_iter, depth + 1, infos)
        return _advance(u_mid, t + half, half, grid, params, eps, tol, max_iter, depth + 1, infos)
    info.halvings = depth
    infos.append(info)
    return u_new


def march(
    u0: np.ndarray,
    grid: Grid,
    params: MarketParams,
    eps: float,
    T: float,
    nt: int,
    tol: float = 1e-10,
    max_iter: int = 30,
    dt_out: float = 0.0,
) -> Trajectory:
    """March ``u0`` from t = 0 to ``T`` in ``nt`` uniform backward-Euler steps.

    Snapshots are kept every ``round(dt_out / dt)`` steps (every step when
    ``dt_out <= 0``), always including t = 0 and t = T.  A failed step is
    retried as two half steps, recursively, at most ``MAX_HALVINGS`` deep.
    """
    u = _pin(u0)
    if T == 0:
        return Trajectory(grid, np.array([0.0]), u[None, :].copy(), 0.0, [])
    if nt < 1:
        raise ValueError("nt must be >= 1")
    dt = T / nt
    stride = 1 if dt_out <= 0 else max(1, int(round(dt_out / dt)))
    times, values, infos = [0.0], [u.copy()], []
    for k in range(1, nt + 1):
        t_old = (k - 1) * dt
        step_dt = k * dt - t_old
        u = _advance(u, t_old, step_dt, grid, params, eps, tol, max_iter, 0, infos)
        if k % stride == 0 or k == nt:
            times.append(k * dt)
            values.append(u.copy())
    return Trajectory(grid, np.array(times), np.array(values), dt, infos)


def initial_profile(grid: Grid, K: float, width: float) -> np.ndarray:
    return _pin(smoothed_profile(grid.x, K, width))


@dataclass
class MonotonicityReport:
    times: np.ndarray
    min_diff: np.ndarray
    location: np.ndarray
    tol: float = MONOTONE_TOL

    @property
    def flagged(self) -> np.ndarray:
        return np.flatnonzero(self.min_diff < -self.tol)

    @property
    def clean(self) -> bool:
        return self.flagged.size == 0

    @property
    def worst(self) -> float:
        return float(np.min(self.min_diff))


def monotonicity_report(traj: Trajectory, tol: float = MONOTONE_TOL) -> MonotonicityReport:
    """Most negative forward difference of u per snapshot and where it sits."""
    d = np.diff(traj.values, axis=1)
    idx = np.argmin(d, axis=1)
    mins = d[np.arange(d.shape[0]), idx]
    return MonotonicityReport(traj.times.copy(), mins, traj.grid.x[idx], tol)
