"""Conservative finite-volume discretisation of the regularised Delta equation.

Interior node ``i`` owns the control volume between the face midpoints
``x_{i-1/2}`` and ``x_{i+1/2}``.  Diffusive fluxes are evaluated at the face
midpoint with the secant slope across the face, the advection term is
upwinded and the reaction term is pointwise.  Nodes 0 and N carry the
Dirichlet data u(0) = 0, u(b) = 1 and have zero rate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .model import MarketParams, diffusion_coeff, diffusion_coeff_dslope

__all__ = [
    "Grid",
    "SolutionField",
    "uniform_grid",
    "graded_grid",
    "make_grid",
    "face_fluxes",
    "semidiscrete_rhs",
    "jacobian",
    "banded_to_dense",
]

LEFT_VALUE = 0.0
RIGHT_VALUE = 1.0


@dataclass(frozen=True)
class Grid:
    x: np.ndarray
    mode: str = "uniform"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1 or x.size < 3:
            raise ValueError("grid needs at least 3 nodes")
        if not np.all(np.diff(x) > 0):
            raise ValueError("grid nodes must be strictly increasing")
        if x[0] != 0.0:
            raise ValueError("grid must start at x = 0")
        object.__setattr__(self, "x", x)

    @property
    def n(self) -> int:
        return self.x.size

    @property
    def b(self) -> float:
        return float(self.x[-1])

    @property
    def dx(self) -> np.ndarray:
        return np.diff(self.x)

    @property
    def faces(self) -> np.ndarray:
        return 0.5 * (self.x[:-1] + self.x[1:])

    @property
    def volumes(self) -> np.ndarray:
        """Control-volume widths ``(x_{i+1} - x_{i-1}) / 2`` of interior nodes."""
        return 0.5 * (self.x[2:] - self.x[:-2])

    def count_in(self, lo: float, hi: float) -> int:
        return int(np.count_nonzero((self.x >= lo) & (self.x <= hi)))


@dataclass(frozen=True)
class SolutionField:
    values: np.ndarray
    time: float

    def pinned(self, atol: float = 0.0) -> bool:
        return abs(self.values[0] - LEFT_VALUE) <= atol and abs(self.values[-1] - RIGHT_VALUE) <= atol


def uniform_grid(nx: int, b: float) -> Grid:
    x = np.linspace(0.0, b, nx)
    x[-1] = b
    return Grid(x, "uniform")


def _side_spacings(length: float, n: int, h0: float, ratio: float) -> np.ndarray:
    """``n`` spacings summing to ``length``, growing geometrically from ``h0``
    until a cap is reached and constant afterwards; ordered outward."""
    if n <= 0:
        return np.empty(0)
    if n * h0 >= length:
        return np.full(n, length / n)
    k = np.arange(1, n + 1)
    best = None
    for m in range(0, n + 1):
        h = h0 * ratio ** np.minimum(k, m)
        if h.sum() >= length:
            best = h
            break
    if best is None:
        best = h0 * ratio**k
    return best * (length / best.sum())


def graded_grid(nx: int, b: float, K: float, width: float, ratio: float = 1.05) -> Grid:
    """Nodes clustered geometrically around the strike.

    A quarter of the intervals is spent uniformly on ``[K - 2w, K + 2w]``
    (clipped to ``[0, b]``); outside, spacings grow by ``ratio`` per cell
    away from the band until they reach a cap fixed by the node budget.
    """
    if ratio < 1.0:
        raise ValueError("grade ratio must be >= 1")
    N = nx - 1
    lo = max(0.0, K - 2.0 * width)
    hi = min(b, K + 2.0 * width)
    nf = max(2, math.ceil(0.25 * N))
    rest = N - nf
    left_len, right_len = lo, b - hi
    if rest < (left_len > 0) + (right_len > 0):
        raise ValueError("too few nodes for a graded grid")
    total = left_len + right_len
    nl = 0 if left_len == 0 else max(1, round(rest * left_len / total))
    nl = min(nl, rest - (right_len > 0))
    nr = rest - nl
    h0 = (hi - lo) / nf
    left = _side_spacings(left_len, nl, h0, ratio)[::-1]
    right = _side_spacings(right_len, nr, h0, ratio)
    steps = np.concatenate([left, np.full(nf, h0), right])
    x = np.concatenate([[0.0], np.cumsum(steps)])
    x[-1] = b
    if nl:
        x[nl] = lo
    x[nl + nf] = hi
    return Grid(x, "graded")


def make_grid(nx: int, b: float, mode: str = "uniform", K: float = 1.0, width: float = 0.0, ratio: float = 1.05) -> Grid:
    if mode == "uniform":
        return uniform_grid(nx, b)
    if mode == "graded":
        return graded_grid(nx, b, K, width, ratio)
    raise ValueError(f"unknown grid mode {mode!r}")


def face_fluxes(u: np.ndarray, t: float, grid: Grid, params: MarketParams, eps: float):
    """Face slopes and diffusive fluxes ``a0(x_f, t, s_f) * s_f``."""
    s = np.diff(u) / grid.dx
    return s, diffusion_coeff(grid.faces, t, s, params, eps) * s


def semidiscrete_rhs(
    u: np.ndarray,
    t: float,
    grid: Grid,
    params: MarketParams,
    eps: float,
    advection: bool = True,
) -> np.ndarray:
    """Per-node rates of the method-of-lines system; zero at both boundary nodes."""
    u = np.asarray(u, dtype=float)
    x, dx = grid.x, grid.dx
    _, flux = face_fluxes(u, t, grid, params, eps)
    rate = np.zeros_like(u)
    rate[1:-1] = (flux[1:] - flux[:-1]) / grid.volumes - params.q * u[1:-1]
    if advection:
        c = (params.r - params.q) * x[1:-1]
        fwd = (u[2:] - u[1:-1]) / dx[1:]
        bwd = (u[1:-1] - u[:-2]) / dx[:-1]
        rate[1:-1] += c * np.where(c >= 0, fwd, bwd)
    return rate


def jacobian(
    u: np.ndarray,
    t: float,
    grid: Grid,
    params: MarketParams,
    eps: float,
    advection: bool = True,
) -> np.ndarray:
    """Exact derivative of :func:`semidiscrete_rhs` in banded storage.

    Returns an array ``ab`` of shape ``(3, n)`` in the layout of
    :func:`scipy.linalg.solve_banded` with ``(l, u) = (1, 1)``:
    ``ab[0, j+1]`` is d rate_j / d u_{j+1}, ``ab[1, j]`` the diagonal and
    ``ab[2, j-1]`` is d rate_j / d u_{j-1}.  Boundary rows are zero.
    """
    u = np.asarray(u, dtype=float)
    x, dx = grid.x, grid.dx
    s = np.diff(u) / dx
    # d(flux)/d(slope): a0 plus the slope-linear part of a0 times the slope
    kf = diffusion_coeff(grid.faces, t, s, params, eps) + diffusion_coeff_dslope(grid.faces, t, params) * s
    g = kf / dx
    vol = grid.volumes
    upper = g[1:] / vol
    lower = g[:-1] / vol
    diag = -(g[1:] + g[:-1]) / vol - params.q
    if advection:
        c = (params.r - params.q) * x[1:-1]
        pos = c >= 0
        upper = upper + np.where(pos, c / dx[1:], 0.0)
        diag = diag + np.where(pos, -c / dx[1:], c / dx[:-1])
        lower = lower + np.where(pos, 0.0, -c / dx[:-1])
    n = u.size
    ab = np.zeros((3, n))
    ab[0, 2:] = upper
    ab[1, 1:-1] = diag
    ab[2, :-2] = lower
    return ab


def banded_to_dense(ab: np.ndarray) -> np.ndarray:
    n = ab.shape[1]
    A = np.diag(ab[1])
    A += np.diag(ab[0, 1:], 1)
    A += np.diag(ab[2, :-1], -1)
    return A
