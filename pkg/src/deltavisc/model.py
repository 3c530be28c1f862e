"""Model constants and coefficient algebra of the Delta equation.

The regularised equation is written in divergence form,

    u_t = (a0(x, t, u_x) u_x)_x + (r - q) x u_x - q u,
    a0  = 0.5 sigma^2 x^2 (1 + e^{rt} a^2 x^2 u_x) + eps,

and, equivalently (for eps = 0), as ``u_t + F(x, t, u, u_x, u_xx) = 0``
with the nondivergence operator :func:`operator_F`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "MarketParams",
    "DomainParams",
    "RegularizationParams",
    "diffusion_coeff",
    "diffusion_coeff_dslope",
    "operator_F",
    "check_proper",
    "divergence_rhs",
]


@dataclass(frozen=True)
class MarketParams:
    sigma: float = 0.2
    r: float = 0.1
    q: float = 0.0
    a: float = 0.02
    K: float = 1.0
    T: float = 0.5

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("sigma must be positive")
        if not self.K > 0:
            raise ValueError("K must be positive")
        if not self.T >= 0:
            raise ValueError("T must be nonnegative")
        for name in ("a", "r", "q"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be nonnegative")


@dataclass(frozen=True)
class DomainParams:
    b: float = 4.0

    def check(self, market: MarketParams) -> None:
        if not self.b > market.K:
            raise ValueError("b must exceed the strike K")


@dataclass(frozen=True)
class RegularizationParams:
    """Viscosity ``eps`` and payoff smoothing half-width (defaults to ``eps``)."""

    eps: float = 1e-3
    half_width: float | None = None

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("eps must be positive")
        if self.half_width is not None and not self.half_width > 0:
            raise ValueError("half_width must be positive")

    @property
    def width(self) -> float:
        return self.eps if self.half_width is None else self.half_width

    def check(self, market: MarketParams) -> None:
        if not self.width < market.K:
            raise ValueError("smoothing half-width must be smaller than K")


def diffusion_coeff(x, t, p, params: MarketParams, eps: float):
    """Nonlinear diffusion ``0.5 sigma^2 x^2 (1 + e^{rt} a^2 x^2 p) + eps``."""
    x = np.asarray(x, dtype=float)
    g = math.exp(params.r * t) * params.a**2
    return 0.5 * params.sigma**2 * x**2 * (1.0 + g * x**2 * np.asarray(p, dtype=float)) + eps


def diffusion_coeff_dslope(x, t, params: MarketParams):
    """Derivative of :func:`diffusion_coeff` with respect to the slope."""
    x = np.asarray(x, dtype=float)
    return 0.5 * params.sigma**2 * math.exp(params.r * t) * params.a**2 * x**4


def operator_F(x, t, s, p, X, params: MarketParams):
    """Nondivergence operator F(x, t, s, p, X) of the eps = 0 equation."""
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    sig2 = params.sigma**2
    g = math.exp(params.r * t) * params.a**2
    return (
        -(0.5 * x**2 * sig2 * (1.0 + 2.0 * g * x**2 * p)) * X
        - 2.0 * sig2 * g * x**3 * p**2
        - (params.r - params.q + sig2) * x * p
        + params.q * s
    )


def check_proper(x, t, p, X1, X2, s1, s2, params: MarketParams, X=None) -> bool:
    """Properness of F at one point.

    Requires ``s1 <= s2``, ``X1 >= X2`` and a nonnegative diffusion factor
    ``1 + 2 e^{rt} a^2 x^2 p``.  Returns True iff
    ``F(.., s, p, X1) <= F(.., s, p, X2)`` and ``F(.., s1, p, X) <= F(.., s2, p, X)``,
    with ``s = s1`` and ``X = X2`` unless given.
    """
    if s1 > s2 or X1 < X2:
        raise ValueError("need s1 <= s2 and X1 >= X2")
    factor = 1.0 + 2.0 * math.exp(params.r * t) * params.a**2 * x**2 * p
    if factor < 0:
        raise ValueError("diffusion factor is negative; F is not proper here")
    X = X2 if X is None else X
    curv = operator_F(x, t, s1, p, X1, params) <= operator_F(x, t, s1, p, X2, params)
    val = operator_F(x, t, s1, p, X, params) <= operator_F(x, t, s2, p, X, params)
    return bool(curv and val)


def divergence_rhs(x, t, u, ux, uxx, params: MarketParams, eps: float = 0.0):
    """Pointwise expansion of ``(a0 u_x)_x + (r - q) x u_x - q u``.

    Used to cross-check the divergence and nondivergence forms; with
    ``eps = 0`` this equals ``-F(x, t, u, u_x, u_xx)``.
    """
    x = np.asarray(x, dtype=float)
    sig2 = params.sigma**2
    g = math.exp(params.r * t) * params.a**2
    a0 = 0.5 * sig2 * x**2 * (1.0 + g * x**2 * ux) + eps
    # d/dx a0 along the profile: explicit x-dependence plus slope dependence
    da0 = sig2 * x * (1.0 + g * x**2 * ux) + 0.5 * sig2 * x**2 * g * (2.0 * x * ux + x**2 * uxx)
    return a0 * uxx + da0 * ux + (params.r - params.q) * x * ux - params.q * u
