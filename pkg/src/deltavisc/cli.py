"""Command-line entry point: ``deltavisc {psi,solve,sweep,verify}``.

Exit codes: 0 success, 2 validation error, 3 solver failure,
4 acceptance (or certification) failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import io
from .config import ConfigError, RunConfig, load_config
from .norms import NORM_NAMES, BOUND_EXPONENTS, SweepResult, discrete_norms, epsilon_sweep
from .pricer import price_residual, reconstruct_price
from .psi_ode import psi_certify, psi_eval
from .solver import solve
from .stepper import StepFailure, monotonicity_report

log = logging.getLogger("deltavisc")

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_SOLVER = 3
EXIT_ACCEPTANCE = 4


def run_psi(config: RunConfig, out: Path) -> int:
    pos = np.logspace(-6, np.log10(config.A_max), config.psi_n)
    A = np.concatenate([-pos[::-1], [0.0], pos])
    psi = psi_eval(A, tol=config.psi_tol)
    io.write_csv(out / "psi.csv", ("A", "psi"), zip(A, psi))
    cert = psi_certify(config.A_max, config.psi_n, tol=config.psi_tol)
    io.write_csv(
        out / "psi_certify.csv",
        ("check", "passed", "worst_margin"),
        ((c.name, c.passed, c.worst_margin) for c in cert.checks),
    )
    for c in cert.checks:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name} (worst margin {c.worst_margin:.3e})")
    return EXIT_OK if cert.passed else EXIT_ACCEPTANCE


def write_trajectory_outputs(config: RunConfig, traj, out: Path) -> None:
    """Write the per-run tables.

    ``traj`` should hold every time step; norms and residuals are computed
    from it, while snapshot, price and residual rows are thinned to the
    ``dt_out`` cadence.
    """
    x = traj.grid.x
    emitted = traj.thinned(config.dt_out)
    keep_t = set(emitted.times.tolist())
    io.write_csv(
        out / "snapshots.csv",
        ("t", "x", "u"),
        ((t, xi, ui) for t, row in zip(emitted.times, emitted.values) for xi, ui in zip(x, row)),
    )
    io.write_csv(
        out / "diagnostics.csv",
        ("t", "dt", "newton_iters", "picard_iters", "residual", "halvings", "min_slope"),
        ((s.t, s.dt, s.newton_iters, s.picard_iters, s.residual, s.halvings, s.min_slope) for s in traj.steps),
    )
    mono = monotonicity_report(traj)
    io.write_csv(
        out / "monotonicity.csv",
        ("t", "min_diff", "x", "flagged"),
        ((t, d, xi, d < -mono.tol) for t, d, xi in zip(mono.times, mono.min_diff, mono.location)),
    )
    norm_rows = []
    if traj.times.size >= 2:
        rep = discrete_norms(traj, config.b, config.eps)
        norm_rows = [(config.eps, name, value) for name, value in rep.as_dict().items()]
    io.write_csv(out / "norms.csv", ("eps", "norm_name", "value"), norm_rows)
    io.write_csv(
        out / "prices.csv",
        ("tau", "S", "V"),
        (
            (config.T - t, s, v)
            for t, row in zip(emitted.times, emitted.values)
            for s, v in zip(x, reconstruct_price(row, x).V)
        ),
    )
    res_rows = []
    if traj.times.size >= 3:
        res = price_residual(traj, config.market)
        res_rows = [
            (config.T - t, s, value)
            for t, row in zip(res.times, res.residual)
            if t in keep_t
            for s, value in zip(res.S, row)
        ]
    io.write_csv(out / "residual.csv", ("tau", "S", "residual_scaled"), res_rows)
    if not mono.clean:
        log.warning("monotonicity flags at t=%s", mono.times[mono.flagged].tolist())


def run_solve(config: RunConfig, out: Path) -> int:
    try:
        traj = solve(config.replace(dt_out=0.0))
    except StepFailure as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    write_trajectory_outputs(config, traj, out)
    print(f"solved to t={traj.times[-1]:g} in {len(traj.steps)} steps ({traj.halvings} after halving)")
    return EXIT_OK


def write_sweep_outputs(result: SweepResult, out: Path) -> None:
    io.write_csv(
        out / "sweep.csv",
        ("eps", "norm_name", "value"),
        ((rep.eps, name, getattr(rep, name)) for rep in result.reports for name in NORM_NAMES),
    )
    checks = result.exponent_checks()
    io.write_csv(
        out / "exponents.csv",
        ("norm_name", "p_measured", "p_paper", "pass"),
        ((name, result.exponents[name], BOUND_EXPONENTS[name], checks[name]) for name in NORM_NAMES),
    )
    io.write_csv(
        out / "cauchy.csv",
        ("eps_coarse", "eps_fine", "delta"),
        zip(result.eps_list[:-1], result.eps_list[1:], result.cauchy),
    )


def run_sweep(config: RunConfig, out: Path, threads: int = 1) -> int:
    try:
        result = epsilon_sweep(config, threads=threads)
    except StepFailure as exc:
        log.error("%s", exc)
        return EXIT_SOLVER
    write_sweep_outputs(result, out)
    for name, ok in result.exponent_checks().items():
        print(f"{'PASS' if ok else 'FAIL'} {name}: p={result.exponents[name]:+.4f} (bound {BOUND_EXPONENTS[name]:g})")
    print("cauchy deltas:", " ".join(f"{d:.4e}" for d in result.cauchy))
    return EXIT_OK if result.passed else EXIT_ACCEPTANCE


def run_verify(config: RunConfig, oracle_tol: float = 2e-2) -> int:
    from .acceptance import run_all

    results = run_all(oracle_tol=oracle_tol)
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deltavisc", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("psi", "solve", "sweep", "verify"):
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None, help="flat key = value file")
        p.add_argument("--out", type=Path, default=None, help="output directory (overrides 'out')")
        p.add_argument("--threads", type=int, default=1)
        if name == "verify":
            p.add_argument("--oracle-tol", type=float, default=2e-2)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        config = load_config(args.config)
        out = Path(args.out) if args.out is not None else Path(config.out)
        if args.threads < 1:
            raise ConfigError("--threads: must be >= 1")
        if args.command == "psi":
            return run_psi(config, out)
        if args.command == "solve":
            return run_solve(config, out)
        if args.command == "sweep":
            return run_sweep(config, out, args.threads)
        return run_verify(config, args.oracle_tol)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
