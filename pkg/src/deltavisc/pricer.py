"""Option prices from the Delta field, and their validation.

The price at backward time ``tau = T - t`` is recovered by integrating the
Delta snapshot at ``t`` from 0 to S.  Validation goes through the price
equation itself: the pointwise residual of

    V_tau + 0.5 sigma^2 (1 + e^{rt} a^2 S^2 V_SS) S^2 V_SS + (r - q) S V_S - r V

with ``V_tau = -V_t`` taken by backward differences of the snapshots.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import ndtr

from .model import MarketParams
from .stepper import Trajectory

__all__ = [
    "PriceCurve",
    "reconstruct_price",
    "linear_delta_oracle",
    "linear_call_oracle",
    "ResidualReport",
    "price_residual",
    "second_difference",
]


@dataclass(frozen=True)
class PriceCurve:
    S: np.ndarray
    V: np.ndarray
    tau: float


def reconstruct_price(u: np.ndarray, x: np.ndarray, tau: float = 0.0) -> PriceCurve:
    """Cumulative trapezoid integral of the Delta values from 0 to each node."""
    x = np.asarray(x, dtype=float)
    V = cumulative_trapezoid(np.asarray(u, dtype=float), x, initial=0.0)
    return PriceCurve(x, V, float(tau))


def _d1(S, t, params: MarketParams):
    return (np.log(S / params.K) + (params.r - params.q + 0.5 * params.sigma**2) * t) / (params.sigma * math.sqrt(t))


def linear_delta_oracle(S, t: float, params: MarketParams):
    """Black-Scholes call Delta ``e^{-qt} N(d1)`` with ``t`` time to expiry.

    At ``t = 0`` the payoff step (with 1/2 at the strike) is returned.
    """
    S = np.asarray(S, dtype=float)
    if t == 0:
        out = np.where(S < params.K, 0.0, np.where(S > params.K, 1.0, 0.5))
    else:
        with np.errstate(divide="ignore"):
            out = math.exp(-params.q * t) * ndtr(_d1(S, t, params))
    return out if out.ndim else float(out)


def linear_call_oracle(S, t: float, params: MarketParams):
    """Black-Scholes call price, for cross-checking reconstructed prices."""
    S = np.asarray(S, dtype=float)
    if t == 0:
        return np.maximum(S - params.K, 0.0)
    with np.errstate(divide="ignore"):
        d1 = _d1(S, t, params)
    d2 = d1 - params.sigma * math.sqrt(t)
    return S * math.exp(-params.q * t) * ndtr(d1) - params.K * math.exp(-params.r * t) * ndtr(d2)


def second_difference(f: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Three-point second derivative; one-sided (nodes 0-2, N-2..N) at the ends."""
    f = np.asarray(f, dtype=float)
    hm = np.diff(x)[:-1]
    hp = np.diff(x)[1:]
    inner = 2.0 * ((f[2:] - f[1:-1]) / hp - (f[1:-1] - f[:-2]) / hm) / (hp + hm)
    out = np.empty_like(f)
    out[1:-1] = inner
    out[0] = inner[0]
    out[-1] = inner[-1]
    return out


@dataclass
class ResidualReport:
    times: np.ndarray  # snapshot times t = T - tau covered by the report
    S: np.ndarray  # trimmed interior nodes
    residual: np.ndarray  # (len(times), len(S)), scaled
    scale: float

    @property
    def max(self) -> float:
        return float(np.max(np.abs(self.residual))) if self.residual.size else 0.0

    @property
    def l2(self) -> float:
        """Root-mean-square of the scaled residual over the trimmed region."""
        return float(np.sqrt(np.mean(self.residual**2))) if self.residual.size else 0.0


def price_residual(
    traj: Trajectory,
    params: MarketParams,
    trim: int = 5,
    t_min: float | None = None,
    eps: float = 0.0,
) -> ResidualReport:
    """Scaled residual of the price equation on the trimmed interior.

    Uses ``V_S`` and ``V_SS`` from centred differences of the reconstructed
    price and ``V_t`` from backward differences in time.  Snapshots with
    ``t < t_min`` (default ``T / 10``) and the ``trim`` nodes nearest each
    boundary are dropped.  The residual is divided by the largest magnitude
    of any single term over the retained region.  ``eps > 0`` adds the
    viscosity to the diffusion, giving the price equation whose Delta
    equation was actually solved.
    """
    if traj.times.size < 3:
        raise ValueError("need at least three snapshots")
    x = traj.grid.x
    T = float(traj.times[-1])
    t_min = T / 10 if t_min is None else t_min
    V = np.array([reconstruct_price(u, x).V for u in traj.values])
    keep = [k for k in range(1, traj.times.size) if traj.times[k] >= t_min]
    sl = slice(trim, x.size - trim)
    S = x[sl]
    rows, scale = [], 0.0
    for k in keep:
        t = float(traj.times[k])
        V_t = (V[k] - V[k - 1]) / (traj.times[k] - traj.times[k - 1])
        V_S = np.gradient(V[k], x)
        V_SS = second_difference(V[k], x)
        g = math.exp(params.r * t) * params.a**2
        terms = np.array([
            -V_t,
            (0.5 * params.sigma**2 * (1.0 + g * x**2 * V_SS) * x**2 + eps) * V_SS,
            (params.r - params.q) * x * V_S,
            -params.r * V[k],
        ])[:, sl]
        rows.append(terms.sum(axis=0))
        scale = max(scale, float(np.max(np.abs(terms))))
    res = np.array(rows) if rows else np.zeros((0, S.size))
    if scale > 0:
        res = res / scale
    return ResidualReport(traj.times[keep], S, res, scale)
