"""Initial Delta profiles: the call-payoff step and its quintic smoothing."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["u0_step", "h5_eval", "h5_derivs", "smoothed_profile", "h5_certify", "H5Report"]

H5_BOUND = 10.0
H5_D1_BOUND = 22.5
H5_D2_BOUND = 40.5


def u0_step(x, K: float):
    """Delta of the call payoff: 0 below K, 1/2 at K, 1 above."""
    x = np.asarray(x, dtype=float)
    out = np.where(x < K, 0.0, np.where(x > K, 1.0, 0.5))
    return out if out.ndim else float(out)


def _band(x, K, eps):
    x = np.asarray(x, dtype=float)
    # small slack so grid nodes computed as K +- eps are accepted
    slack = 1e-12 * max(1.0, abs(K))
    if np.any(x < K - eps - slack) or np.any(x > K + eps + slack):
        raise ValueError("x outside the smoothing band [K - eps, K + eps]")
    return x - K + eps, x - K - eps


def h5_eval(x, K: float, eps: float):
    """Degree-5 Hermite interpolant joining 0 at K - eps to 1 at K + eps.

    Written in the divided-difference form

        y^3 / (8 eps^3) - 3 y^3 z / (16 eps^4) + 3 y^3 z^2 / (16 eps^5),

    with ``y = x - K + eps`` and ``z = x - K - eps``; first and second
    derivatives vanish at both ends.
    """
    y, z = _band(x, K, eps)
    out = y**3 / (8 * eps**3) - 3 * y**3 * z / (16 * eps**4) + 3 * y**3 * z**2 / (16 * eps**5)
    return out if np.ndim(out) else float(out)


def h5_derivs(x, K: float, eps: float):
    """First and second derivatives of :func:`h5_eval`."""
    y, z = _band(x, K, eps)
    d1 = (
        3 * y**2 / (8 * eps**3)
        - 9 * y**2 * z / (16 * eps**4)
        - 3 * y**3 / (16 * eps**4)
        + 9 * y**2 * z**2 / (16 * eps**5)
        + 6 * y**3 * z / (16 * eps**5)
    )
    d2 = (
        6 * y / (8 * eps**3)
        - 18 * y * z / (16 * eps**4)
        - 18 * y**2 / (16 * eps**4)
        + 18 * y * z**2 / (16 * eps**5)
        + 36 * y**2 * z / (16 * eps**5)
        + 6 * y**3 / (16 * eps**5)
    )
    return d1, d2


def smoothed_profile(x, K: float, eps: float):
    """Step profile with the band ``[K - eps, K + eps]`` replaced by H5."""
    x = np.asarray(x, dtype=float)
    out = u0_step(x, K) * np.ones_like(x)
    inside = (x >= K - eps) & (x <= K + eps)
    if np.any(inside):
        out = np.array(out, dtype=float)
        out[inside] = h5_eval(x[inside], K, eps)
    return out if out.ndim else float(out)


@dataclass
class H5Report:
    eps: float
    n: int
    sup_h: float
    sup_d1: float
    sup_d2: float

    @property
    def checks(self) -> dict[str, bool]:
        return {
            "sup|H5|<=10": self.sup_h <= H5_BOUND,
            "sup|H5'|<=22.5/eps": self.sup_d1 <= H5_D1_BOUND / self.eps,
            "sup|H5''|<=40.5/eps^2": self.sup_d2 <= H5_D2_BOUND / self.eps**2,
        }

    @property
    def passed(self) -> bool:
        return all(self.checks.values())


def h5_certify(eps: float, n: int, K: float = 1.0) -> H5Report:
    """Sample H5 and its first two derivatives on ``n`` points of the band."""
    if n < 3:
        raise ValueError("n must be at least 3")
    x = np.linspace(K - eps, K + eps, n)
    h = np.asarray(h5_eval(x, K, eps))
    d1, d2 = h5_derivs(x, K, eps)
    return H5Report(
        eps=eps,
        n=n,
        sup_h=float(np.max(np.abs(h))),
        sup_d1=float(np.max(np.abs(d1))),
        sup_d2=float(np.max(np.abs(d2))),
    )
