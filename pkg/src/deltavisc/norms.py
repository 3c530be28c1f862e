"""Discrete Sobolev norms of ``v = u - x/b`` and epsilon sweeps.

Conventions (fixed, so results are reproducible from a trajectory alone):

* spatial L2 by the trapezoid rule on the grid nodes;
* ``v_x`` by centred differences, one-sided at the two end nodes;
* ``v_xx`` by the three-point second difference, one-sided at the ends;
* ``v_t`` by forward differences between snapshots (backward at the last);
* time L2 by the trapezoid rule over snapshot times;
* L-infinity as a max over nodes and snapshots.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .pricer import second_difference
from .stepper import Trajectory

__all__ = [
    "NORM_NAMES",
    "BOUND_EXPONENTS",
    "BOUNDED_NORMS",
    "NormReport",
    "shift_to_v",
    "discrete_norms",
    "fit_exponent",
    "cauchy_deltas",
    "SweepResult",
    "UnderResolvedError",
    "epsilon_sweep",
]

NORM_NAMES = (
    "v_Linf_L2",
    "v_Linf_Linf",
    "vx_L2_L2",
    "vx_Linf_L2",
    "vxx_L2_L2",
    "vt_L2_L2",
    "w_Linf_Linf",
)

#: Upper-bound growth rates in 1/eps for each norm.
BOUND_EXPONENTS = {
    "v_Linf_L2": 0.0,
    "v_Linf_Linf": 0.0,
    "vx_L2_L2": 0.5,
    "vx_Linf_L2": 1.5,
    "vxx_L2_L2": 2.0,
    "vt_L2_L2": 1.0,
    "w_Linf_Linf": 4.0,
}
BOUNDED_NORMS = ("v_Linf_L2", "v_Linf_Linf")
EXPONENT_SLACK = 0.25
BOUNDED_SLACK = 0.1
MIN_BAND_NODES = 8


class UnderResolvedError(ValueError):
    """The grid does not resolve the smallest smoothing band."""


@dataclass(frozen=True)
class NormReport:
    eps: float
    v_Linf_L2: float
    v_Linf_Linf: float
    vx_L2_L2: float
    vx_Linf_L2: float
    vxx_L2_L2: float
    vt_L2_L2: float
    w_Linf_Linf: float

    def as_dict(self) -> dict[str, float]:
        return {name: getattr(self, name) for name in NORM_NAMES}


def shift_to_v(u: np.ndarray, x: np.ndarray, b: float | None = None) -> np.ndarray:
    """``v = u - x/b``; vanishes at both ends for boundary-pinned ``u``."""
    x = np.asarray(x, dtype=float)
    b = float(x[-1]) if b is None else b
    return np.asarray(u, dtype=float) - x / b


def _space_l2(f: np.ndarray, x: np.ndarray) -> np.ndarray:
    return np.sqrt(np.trapezoid(f**2, x, axis=-1))


def _time_l2(g: np.ndarray, t: np.ndarray) -> float:
    return float(math.sqrt(np.trapezoid(g**2, t)))


def discrete_norms(traj: Trajectory, b: float | None = None, eps: float = float("nan")) -> NormReport:
    if traj.times.size < 2:
        raise ValueError("need at least two snapshots")
    x = traj.grid.x
    t = traj.times
    v = shift_to_v(traj.values, x, b)
    vx = np.gradient(v, x, axis=1)
    vxx = np.array([second_difference(row, x) for row in v])
    vt = np.diff(v, axis=0) / np.diff(t)[:, None]
    vt = np.vstack([vt, vt[-1:]])
    w = np.gradient(traj.values, x, axis=1)
    return NormReport(
        eps=eps,
        v_Linf_L2=float(np.max(_space_l2(v, x))),
        v_Linf_Linf=float(np.max(np.abs(v))),
        vx_L2_L2=_time_l2(_space_l2(vx, x), t),
        vx_Linf_L2=float(np.max(_space_l2(vx, x))),
        vxx_L2_L2=_time_l2(_space_l2(vxx, x), t),
        vt_L2_L2=_time_l2(_space_l2(vt, x), t),
        w_Linf_Linf=float(np.max(np.abs(w))),
    )


def fit_exponent(eps: np.ndarray, values: np.ndarray) -> float:
    """Least-squares slope of ``log(value)`` against ``log(1/eps)``."""
    eps = np.asarray(eps, dtype=float)
    values = np.asarray(values, dtype=float)
    if np.any(values <= 0):
        return float("nan")
    slope, _ = np.polyfit(np.log(1.0 / eps), np.log(values), 1)
    return float(slope)


def _on_grid(traj: Trajectory, x: np.ndarray) -> np.ndarray:
    if traj.grid.x.size == x.size and np.array_equal(traj.grid.x, x):
        return traj.values
    return np.array([np.interp(x, traj.grid.x, row) for row in traj.values])


def cauchy_deltas(trajs: list[Trajectory]) -> np.ndarray:
    """Successive ``max |u_k - u_{k+1}|`` over the first grid and all t > 0.

    Snapshot times must coincide across runs; grids may differ, in which
    case later runs are linearly interpolated onto the first run's nodes.
    """
    x = trajs[0].grid.x
    out = []
    for a, b in zip(trajs[:-1], trajs[1:]):
        if a.times.shape != b.times.shape or not np.allclose(a.times, b.times):
            raise ValueError("sweep members must share snapshot times")
        later = a.times > 0
        diff = _on_grid(a, x)[later] - _on_grid(b, x)[later]
        out.append(float(np.max(np.abs(diff))) if diff.size else 0.0)
    return np.array(out)


@dataclass
class SweepResult:
    eps_list: np.ndarray
    reports: list[NormReport]
    exponents: dict[str, float]
    cauchy: np.ndarray
    fit_points: int = 3
    trajectories: list[Trajectory] = field(default_factory=list, repr=False)

    def exponent_checks(self) -> dict[str, bool]:
        out = {}
        for name in NORM_NAMES:
            p = self.exponents[name]
            ok = np.isfinite(p) and p <= BOUND_EXPONENTS[name] + EXPONENT_SLACK
            if name in BOUNDED_NORMS:
                ok = ok and p <= BOUNDED_SLACK
            out[name] = bool(ok)
        return out

    @property
    def passed(self) -> bool:
        return all(self.exponent_checks().values())

    @property
    def cauchy_decreasing(self) -> bool:
        return bool(np.all(np.diff(self.cauchy) < 0))


def epsilon_sweep(config, eps_list=None, threads: int = 1, fit_points: int = 3) -> SweepResult:
    """Solve once per viscosity and compare norms across the sweep.

    ``config`` is a :class:`deltavisc.config.RunConfig`; each member uses
    it with ``eps`` (and the smoothing width, unless set explicitly)
    replaced.  Snapshots are taken at every step regardless of ``dt_out``.
    """
    from .solver import solve  # local import: solver depends on config helpers

    eps_list = np.asarray(config.eps_list if eps_list is None else eps_list, dtype=float)
    if eps_list.size < 3:
        raise ValueError("eps_list needs at least three values")
    if not np.all(np.diff(eps_list) < 0):
        raise ValueError("eps_list must be strictly decreasing")
    members = [config.replace(eps=float(e), dt_out=0.0) for e in eps_list]
    smallest = members[-1]
    grid = smallest.build_grid()
    w = smallest.width
    if grid.count_in(smallest.K - w, smallest.K + w) < MIN_BAND_NODES:
        raise UnderResolvedError(
            f"grid puts fewer than {MIN_BAND_NODES} nodes across [K-{w:g}, K+{w:g}]"
        )
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            trajs = list(pool.map(solve, members))
    else:
        trajs = [solve(m) for m in members]
    reports = [discrete_norms(tr, m.b, m.eps) for tr, m in zip(trajs, members)]
    k = min(max(fit_points, 2), eps_list.size)
    tail = slice(eps_list.size - k, None)
    exponents = {
        name: fit_exponent(eps_list[tail], [getattr(r, name) for r in reports[tail]])
        for name in NORM_NAMES
    }
    return SweepResult(eps_list, reports, exponents, cauchy_deltas(trajs), k, trajs)
