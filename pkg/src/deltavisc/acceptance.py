"""Exit criteria of the build, runnable from pytest or ``deltavisc verify``.

Each ``criterion_*`` function runs one check at its pinned parameters and
tolerances and returns a :class:`CriterionResult`.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from . import psi_ode
from .config import RunConfig
from .model import check_proper, operator_F
from .norms import BOUNDED_NORMS, NORM_NAMES, BOUND_EXPONENTS, SweepResult, epsilon_sweep
from .payoff import h5_certify, h5_derivs, h5_eval, smoothed_profile, u0_step
from .pricer import linear_delta_oracle, price_residual, reconstruct_price
from .solver import solve
from .stepper import monotonicity_report

__all__ = [
    "CriterionResult",
    "LINEAR_BENCHMARK",
    "NONLINEAR_BENCHMARK",
    "SWEEP_BENCHMARK",
    "criterion_psi",
    "criterion_h5",
    "criterion_linear_oracle",
    "criterion_scaling",
    "criterion_cauchy",
    "criterion_structure",
    "criterion_round_trip",
    "run_all",
]

LINEAR_BENCHMARK = RunConfig(
    sigma=0.2, r=0.1, q=0.0, a=0.0, K=1.0, T=0.5, b=4.0, eps=1e-3, nx=801, nt=500, dt_out=0.0
)
NONLINEAR_BENCHMARK = LINEAR_BENCHMARK.replace(a=0.02)
SWEEP_BENCHMARK = NONLINEAR_BENCHMARK.replace(nx=1601, nt=1000, eps_list=(0.2, 0.1, 0.05, 0.025))

ORACLE_TOL = 2e-2
MIN_ORDER = 0.9
RESIDUAL_TOL = 5e-2
FAR_FIELD_TOL = 1e-2
ORDER_TOL = 1e-8


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    elapsed: float = 0.0
    values: dict = field(default_factory=dict)

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.number}. {self.name}: {self.detail} ({self.elapsed:.2f}s)"


def _order(e_coarse: float, e_fine: float) -> float:
    return math.log2(e_coarse / e_fine) if e_fine > 0 else math.inf


# 1 -------------------------------------------------------------------------
def criterion_psi(n: int = 10_000, fresh: bool = True) -> CriterionResult:
    start = time.perf_counter()
    if fresh:
        psi_ode._cached_table.cache_clear()
    pos = np.logspace(-6, 2, n)
    A = np.concatenate([-pos[::-1], [0.0], pos])
    psi = psi_ode.psi_eval(A)
    far_p, far_m = psi_ode.psi_eval(np.array([1e4, -1e4]))
    neg, nonneg = A < 0, A >= 0
    checks = {
        "psi(0)=0": psi_ode.psi_eval(0.0) == 0.0,
        "nondecreasing": bool(np.all(np.diff(psi) >= 0)),
        "neg in (-1,0]": bool(np.all((psi[neg] > -1) & (psi[neg] <= 0))),
        "psi<=1.1A+2.62": bool(np.all(psi[nonneg] <= 1.1 * A[nonneg] + 2.62)),
        "psi(1e4)/1e4~1": abs(far_p / 1e4 - 1) <= 0.05,
        "psi(-1e4) in (-1,-0.95]": -1 < far_m <= -0.95,
    }
    elapsed = time.perf_counter() - start
    checks["runtime<=5s"] = elapsed <= 5.0
    failed = [k for k, ok in checks.items() if not ok]
    detail = f"psi(1e4)/1e4={far_p / 1e4:.6f}, psi(-1e4)={far_m:.6f}" + (f"; failed {failed}" if failed else "")
    return CriterionResult(1, "psi certificate", not failed, detail, elapsed, checks)


# 2 -------------------------------------------------------------------------
def criterion_h5(K: float = 1.0, n: int = 10_000) -> CriterionResult:
    start = time.perf_counter()
    checks = {}
    for eps in (0.1, 0.01):
        rep = h5_certify(eps, n, K)
        for name, ok in rep.checks.items():
            checks[f"eps={eps} {name}"] = ok
        ends = np.array([K - eps, K + eps])
        h = np.asarray(h5_eval(ends, K, eps))
        d1, d2 = h5_derivs(ends, K, eps)
        checks[f"eps={eps} endpoints"] = bool(
            abs(h[0]) <= 1e-10 and abs(h[1] - 1) <= 1e-10 and np.all(np.abs(d1) <= 1e-10) and np.all(np.abs(d2) <= 1e-10)
        )
        checks[f"eps={eps} H5(K)=0.5"] = abs(h5_eval(K, K, eps) - 0.5) <= 1e-12
    failed = [k for k, ok in checks.items() if not ok]
    elapsed = time.perf_counter() - start
    return CriterionResult(2, "H5 suite", not failed, "all bounds hold" if not failed else f"failed {failed}", elapsed, checks)


# 3 -------------------------------------------------------------------------
def _oracle_error(cfg: RunConfig, trim: int = 5) -> float:
    tr = solve(cfg)
    exact = linear_delta_oracle(tr.grid.x, cfg.T, cfg.market)
    return float(np.max(np.abs(tr.values[-1] - exact)[trim:-trim]))


def criterion_linear_oracle(tol: float = ORACLE_TOL) -> CriterionResult:
    start = time.perf_counter()
    cfg = LINEAR_BENCHMARK
    e1 = _oracle_error(cfg)
    e2 = _oracle_error(cfg.replace(nx=2 * (cfg.nx - 1) + 1, nt=2 * cfg.nt))
    order = _order(e1, e2)
    elapsed = time.perf_counter() - start
    checks = {"error<=tol": e1 <= tol, "order>=0.9": order >= MIN_ORDER, "runtime<=60s": elapsed <= 60}
    ok = all(checks.values())
    detail = f"max error {e1:.3e} (tol {tol:.1e}), refined {e2:.3e}, order {order:.3f}"
    return CriterionResult(3, "linear-limit oracle", ok, detail, elapsed, {**checks, "e1": e1, "e2": e2, "order": order})


# 4, 5 ----------------------------------------------------------------------
@lru_cache(maxsize=1)
def benchmark_sweep() -> tuple[SweepResult, float]:
    start = time.perf_counter()
    result = epsilon_sweep(SWEEP_BENCHMARK)
    return result, time.perf_counter() - start


def criterion_scaling() -> CriterionResult:
    sweep, elapsed = benchmark_sweep()
    checks = sweep.exponent_checks()
    checks["runtime<=600s"] = elapsed <= 600
    failed = [k for k, ok in checks.items() if not ok]
    limits = {n: 0.1 if n in BOUNDED_NORMS else BOUND_EXPONENTS[n] + 0.25 for n in NORM_NAMES}
    parts = ", ".join(f"{n}={sweep.exponents[n]:+.3f}(<= {limits[n]:g})" for n in NORM_NAMES)
    detail = parts + (f"; failed {failed}" if failed else "")
    return CriterionResult(4, "eps-scaling suite", not failed, detail, elapsed, dict(sweep.exponents))


def criterion_cauchy() -> CriterionResult:
    sweep, elapsed = benchmark_sweep()
    deltas = ", ".join(f"{d:.4e}" for d in sweep.cauchy)
    return CriterionResult(5, "eps-Cauchy convergence", sweep.cauchy_decreasing, f"deltas {deltas}", elapsed)


# 6 -------------------------------------------------------------------------
def properness_samples(n: int = 10_000, seed: int = 0) -> tuple[int, int]:
    """Randomised properness checks; returns (passed, total)."""
    rng = np.random.default_rng(seed)
    # nonzero dividend so the value-monotonicity margin is not trivially zero
    market = NONLINEAR_BENCHMARK.replace(q=0.05).market
    ok = 0
    for _ in range(n):
        x = rng.uniform(0, NONLINEAR_BENCHMARK.b)
        t = rng.uniform(0, market.T)
        p = rng.uniform(0, 50)
        s1, s2 = np.sort(rng.normal(size=2) * 2)
        X2, X1 = np.sort(rng.normal(size=2) * 100)
        dF = operator_F(x, t, s2, p, X1, market) - operator_F(x, t, s1, p, X1, market)
        slope_ok = abs(dF - market.q * (s2 - s1)) <= 1e-12 * (1 + abs(operator_F(x, t, s1, p, X1, market)))
        ok += bool(slope_ok and check_proper(x, t, p, X1, X2, s1, s2, market))
    return ok, n


def comparison_pairs(cfg: RunConfig = NONLINEAR_BENCHMARK):
    """Three ordered initial-data pairs (lower, upper) on the benchmark grid."""
    x = cfg.build_grid().x
    h = x[1] - x[0]
    w = cfg.width
    K = cfg.K
    return [
        ("step(K) <= smooth(K-w)", u0_step(x, K), smoothed_profile(x, K - w, w)),
        ("smooth(K) <= smooth(K-h)", smoothed_profile(x, K, w), smoothed_profile(x, K - h, w)),
        ("step(K+h) <= step(K)", u0_step(x, K + h), u0_step(x, K)),
    ]


def criterion_structure(cfg: RunConfig = NONLINEAR_BENCHMARK) -> CriterionResult:
    start = time.perf_counter()
    good, total = properness_samples()
    checks = {f"properness {good}/{total}": good == total}
    worst_gap = 0.0
    for name, lo, hi in comparison_pairs(cfg):
        if np.any(lo > hi):
            raise AssertionError(f"pair {name} is not ordered")
        ta, tb = solve(cfg, lo), solve(cfg, hi)
        gap = float(np.max(ta.values - tb.values))
        worst_gap = max(worst_gap, gap)
        checks[f"comparison {name}"] = gap <= ORDER_TOL
    rep = monotonicity_report(solve(cfg))
    checks["monotonicity clean"] = rep.clean
    failed = [k for k, ok in checks.items() if not ok]
    detail = f"properness {good}/{total}, worst order violation {worst_gap:.2e}, min forward diff {rep.worst:.2e}"
    if failed:
        detail += f"; failed {failed}"
    return CriterionResult(6, "structure/comparison", not failed, detail, time.perf_counter() - start, checks)


# 7 -------------------------------------------------------------------------
def round_trip_checks(cfg: RunConfig, tail: int = 5) -> dict:
    tr = solve(cfg)
    x = tr.grid.x
    b = x[-1]
    market = cfg.market
    v0, slope_err, ratio_err = 0.0, 0.0, 0.0
    for t, u in zip(tr.times, tr.values):
        pc = reconstruct_price(u, x, cfg.T - t)
        v0 = max(v0, abs(pc.V[0]))
        slope = np.gradient(pc.V, x)[-1 - tail:-1]
        slope_err = max(slope_err, float(np.max(np.abs(slope - 1))))
        ratio_err = max(ratio_err, abs(pc.V[-1] / (b - market.K * math.exp(-market.r * t)) - 1))
    res = price_residual(tr, market)
    res_eps = price_residual(tr, market, eps=cfg.eps)
    return {"V0": v0, "slope_err": slope_err, "ratio_err": ratio_err, "residual": res.max, "residual_eps": res_eps.max}


def criterion_round_trip(cfg: RunConfig = NONLINEAR_BENCHMARK) -> CriterionResult:
    start = time.perf_counter()
    coarse = round_trip_checks(cfg)
    fine = round_trip_checks(cfg.replace(nx=2 * (cfg.nx - 1) + 1, nt=2 * cfg.nt))
    order = _order(coarse["residual"], fine["residual"])
    order_eps = _order(coarse["residual_eps"], fine["residual_eps"])
    checks = {
        "V(0)=0": coarse["V0"] == 0.0,
        "far-field slope": coarse["slope_err"] <= FAR_FIELD_TOL,
        "V(b)/(b-Ke^-rt)": coarse["ratio_err"] <= FAR_FIELD_TOL,
        "residual<=5e-2": coarse["residual"] <= RESIDUAL_TOL,
        "residual order>=0.9": order >= MIN_ORDER,
    }
    failed = [k for k, ok in checks.items() if not ok]
    detail = (
        f"slope err {coarse['slope_err']:.1e}, ratio err {coarse['ratio_err']:.1e}, "
        f"residual {coarse['residual']:.3e} -> {fine['residual']:.3e} (order {order:.3f}); "
        f"with eps in the diffusion: {coarse['residual_eps']:.3e} -> {fine['residual_eps']:.3e} (order {order_eps:.3f})"
    )
    if failed:
        detail += f"; failed {failed}"
    values = {**checks, "order": order, "order_eps": order_eps, **{f"coarse_{k}": v for k, v in coarse.items()}}
    return CriterionResult(7, "price round trip", not failed, detail, time.perf_counter() - start, values)


def run_all(oracle_tol: float = ORACLE_TOL) -> list[CriterionResult]:
    return [
        criterion_psi(),
        criterion_h5(),
        criterion_linear_oracle(oracle_tol),
        criterion_scaling(),
        criterion_cauchy(),
        criterion_structure(),
        criterion_round_trip(),
    ]
