"""Barles-Soner volatility adjustment function.

``psi`` solves

    psi'(A) = (psi(A) + 1) / (2 sqrt(A psi(A)) - A),    psi(0) = 0,

which is singular at the origin (psi' ~ |A|**(-2/3)).  Each branch is
integrated outward from ``+-seed_radius`` in the log variable ``s = ln|A|``
with an embedded Runge-Kutta pair, sampled on a log-uniform node set and
stored as a cubic Hermite table whose node slopes come straight from the
right-hand side of the ODE.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicHermiteSpline

__all__ = [
    "SEED_COEFF",
    "PsiIntegrationError",
    "PsiTable",
    "psi_seed",
    "psi_rhs",
    "build_table",
    "psi_eval",
    "psi_certify",
    "PsiCertificate",
]

#: Leading coefficient of the cube-root start, psi ~ c A**(1/3).
SEED_COEFF = 1.5 ** (2.0 / 3.0)
#: Second-order coefficient, psi ~ c x + d x**2 with x = A**(1/3).
SEED_COEFF2 = 0.8 * math.sqrt(SEED_COEFF)

DEFAULT_SEED_RADIUS = 1e-8
DEFAULT_TOL = 1e-9
DEFAULT_RANGE = 1e5

LINEAR_BOUND_SLOPE = 1.1
LINEAR_BOUND_INTERCEPT = 2.62


class PsiIntegrationError(RuntimeError):
    """Raised when the step controller gives up on a branch."""


def psi_seed(A, order: int = 1):
    """Local asymptotic solution near ``A = 0``.

    ``order=1`` returns ``sign(A) c |A|**(1/3)``; ``order=2`` adds the
    ``(4/5) sqrt(c) |A|**(2/3)`` correction used to start the integrator.
    """
    x = np.cbrt(np.asarray(A, dtype=float))
    out = SEED_COEFF * x
    if order >= 2:
        out = out + SEED_COEFF2 * x * x
    return out if out.ndim else float(out)


def psi_rhs(A, psi):
    """Right-hand side of the ODE, vectorised.

    For ``A < 0`` the square root is taken of ``|A| |psi|``; the product of
    two nonpositive numbers.
    """
    A = np.asarray(A, dtype=float)
    psi = np.asarray(psi, dtype=float)
    root = np.sqrt(np.abs(A) * np.abs(psi))
    return (psi + 1.0) / (2.0 * root - A)


@dataclass(frozen=True)
class PsiTable:
    """Immutable cubic Hermite table of psi on ``[-A_range, A_range]``."""

    A: np.ndarray
    psi: np.ndarray
    dpsi: np.ndarray
    seed_radius: float
    tol: float
    _spline: CubicHermiteSpline = field(repr=False, compare=False)

    @property
    def nodes(self) -> list[tuple[float, float]]:
        return list(zip(self.A.tolist(), self.psi.tolist()))

    @property
    def A_range(self) -> float:
        return float(min(-self.A[0], self.A[-1]))

    def __call__(self, A):
        A = np.asarray(A, dtype=float)
        if np.any(np.abs(A) > self.A_range * (1 + 1e-12)):
            raise ValueError(f"|A| exceeds table range {self.A_range:g}")
        inner = np.abs(A) <= self.seed_radius
        out = np.zeros_like(A)
        if np.any(inner):
            out[inner] = psi_seed(A[inner], order=2)
        if np.any(~inner):
            out[~inner] = self._spline(A[~inner])
        return out if out.ndim else float(out)


def _integrate_branch(sign: int, seed_radius: float, A_range: float, tol: float, method: str):
    def rhs(s, y):
        A = sign * math.exp(s)
        return [A * psi_rhs(A, y[0])]

    s0 = math.log(seed_radius)
    s1 = math.log(A_range)
    y0 = psi_seed(sign * seed_radius, order=2)
    # local tolerances sit well below the requested global accuracy
    itol = max(tol * 1e-3, 1e-14)
    sol = solve_ivp(rhs, (s0, s1), [y0], method=method, rtol=itol, atol=itol, dense_output=True)
    if sol.status != 0:
        raise PsiIntegrationError(f"branch sign={sign:+d}: {sol.message}")
    return sol.sol, s0, s1


def _node_spacing(tol: float) -> float:
    # log-spacing fine enough that centred differences of the table resolve psi' to ~tol
    return float(np.clip(math.sqrt(10.0 * tol), 1e-4, 1e-2))


def build_table(
    tol: float = DEFAULT_TOL,
    seed_radius: float = DEFAULT_SEED_RADIUS,
    A_range: float = DEFAULT_RANGE,
    method: str = "DOP853",
) -> PsiTable:
    """Integrate both branches and assemble a :class:`PsiTable`."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if not 0 < seed_radius < A_range:
        raise ValueError("need 0 < seed_radius < A_range")
    delta = _node_spacing(tol)
    pieces_A, pieces_psi = [], []
    for sign in (-1, 1):
        dense, s0, s1 = _integrate_branch(sign, seed_radius, A_range, tol, method)
        n = int(math.ceil((s1 - s0) / delta)) + 1
        s = np.linspace(s0, s1, n)
        A = sign * np.exp(s)
        vals = dense(s)[0]
        if sign < 0:
            A, vals = A[::-1], vals[::-1]
        pieces_A.append(A)
        pieces_psi.append(vals)
    A = np.concatenate(pieces_A)
    psi = np.concatenate(pieces_psi)
    dpsi = psi_rhs(A, psi)
    # the gap (-seed_radius, seed_radius) is served by the seed, not the spline
    spline = CubicHermiteSpline(A, psi, dpsi, extrapolate=False)
    return PsiTable(A=A, psi=psi, dpsi=dpsi, seed_radius=seed_radius, tol=tol, _spline=spline)


@functools.lru_cache(maxsize=16)
def _cached_table(tol: float, seed_radius: float, A_range: float) -> PsiTable:
    return build_table(tol=tol, seed_radius=seed_radius, A_range=A_range)


def _range_for(amax: float) -> float:
    if amax <= DEFAULT_RANGE:
        return DEFAULT_RANGE
    return 10.0 ** math.ceil(math.log10(amax) + 1e-12)


def psi_eval(A, tol: float = DEFAULT_TOL, seed_radius: float = DEFAULT_SEED_RADIUS):
    """Evaluate psi at scalar or array ``A`` through a cached table.

    The error is controlled in the mixed sense ``tol * max(1, |psi|)``.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    arr = np.asarray(A, dtype=float)
    amax = float(np.max(np.abs(arr))) if arr.size else 0.0
    table = _cached_table(float(tol), float(seed_radius), _range_for(amax))
    return table(A)


@dataclass
class PropertyCheck:
    name: str
    passed: bool
    worst_margin: float


@dataclass
class PsiCertificate:
    A_max: float
    n: int
    checks: list[PropertyCheck]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict[str, tuple[bool, float]]:
        return {c.name: (c.passed, c.worst_margin) for c in self.checks}


def psi_certify(A_max: float, n: int, tol: float = DEFAULT_TOL, far: float = 1e4) -> PsiCertificate:
    """Check the four qualitative properties of psi on log-spaced samples.

    Samples ``n`` points in ``(0, A_max]`` and ``n`` in ``[-A_max, 0)``,
    starting at ``min(1e-6, A_max)``.  Margins are positive when a check
    passes; the reported margin is the smallest one seen.

    ``limits``: |psi(F)/F - 1| <= 0.05 and psi(-F) in (-1, -0.95] at
    ``F = max(far, A_max)``.
    ``signs``: psi >= 0 on the positive side, -1 < psi <= 0 on the negative.
    ``monotone``: psi nondecreasing over all samples, including ``A = 0``.
    ``linear_bound``: psi(A) <= 1.1 A + 2.62 for ``A >= 0``.
    """
    if not A_max > 0:
        raise ValueError("A_max must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    lo = min(1e-6, A_max)
    pos = np.logspace(math.log10(lo), math.log10(A_max), n)
    A = np.concatenate([-pos[::-1], [0.0], pos])
    psi = np.asarray(psi_eval(A, tol=tol))
    neg = A < 0
    nonneg = A >= 0

    F = max(far, A_max)
    p_far, m_far = psi_eval(np.array([F, -F]), tol=tol)
    lim_margin = min(0.05 - abs(p_far / F - 1.0), m_far + 1.0, -0.95 - m_far)
    lim_ok = bool(abs(p_far / F - 1.0) <= 0.05 and -1.0 < m_far <= -0.95)

    sign_margin = min(float(np.min(psi[nonneg])), float(np.min(psi[neg] + 1.0)), float(np.min(-psi[neg])))
    sign_ok = bool(np.all(psi[nonneg] >= 0) and np.all(psi[neg] > -1.0) and np.all(psi[neg] <= 0))

    steps = np.diff(psi)
    mono_ok = bool(np.all(steps >= 0))
    mono_margin = float(np.min(steps))

    gap = LINEAR_BOUND_SLOPE * A[nonneg] + LINEAR_BOUND_INTERCEPT - psi[nonneg]
    bound_ok = bool(np.all(gap >= 0))

    checks = [
        PropertyCheck("limits", lim_ok, float(lim_margin)),
        PropertyCheck("signs", sign_ok, sign_margin),
        PropertyCheck("monotone", mono_ok, mono_margin),
        PropertyCheck("linear_bound", bound_ok, float(np.min(gap))),
    ]
    return PsiCertificate(A_max=float(A_max), n=int(n), checks=checks)
