"""CSV emission and the matching reader.

Every table has one header row; floats are written with 17 significant
digits so values round-trip exactly.

=================  ==========================================
file               columns
=================  ==========================================
psi.csv            A, psi
psi_certify.csv    check, passed, worst_margin
snapshots.csv      t, x, u
diagnostics.csv    t, dt, newton_iters, picard_iters, residual, halvings, min_slope
monotonicity.csv   t, min_diff, x, flagged
norms.csv          eps, norm_name, value
prices.csv         tau, S, V
residual.csv       tau, S, residual_scaled
sweep.csv          eps, norm_name, value
exponents.csv      norm_name, p_measured, p_paper, pass
cauchy.csv         eps_coarse, eps_fine, delta
=================  ==========================================
"""

from __future__ import annotations

import csv
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

__all__ = ["fmt", "write_csv", "read_csv", "SCHEMAS"]

SCHEMAS = {
    "psi.csv": ("A", "psi"),
    "psi_certify.csv": ("check", "passed", "worst_margin"),
    "snapshots.csv": ("t", "x", "u"),
    "diagnostics.csv": ("t", "dt", "newton_iters", "picard_iters", "residual", "halvings", "min_slope"),
    "monotonicity.csv": ("t", "min_diff", "x", "flagged"),
    "norms.csv": ("eps", "norm_name", "value"),
    "prices.csv": ("tau", "S", "V"),
    "residual.csv": ("tau", "S", "residual_scaled"),
    "sweep.csv": ("eps", "norm_name", "value"),
    "exponents.csv": ("norm_name", "p_measured", "p_paper", "pass"),
    "cauchy.csv": ("eps_coarse", "eps_fine", "delta"),
}


def fmt(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def write_csv(path: str | Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    path = Path(path)
    expected = SCHEMAS.get(path.name)
    if expected is not None and tuple(header) != expected:
        raise ValueError(f"{path.name}: header {tuple(header)} does not match schema {expected}")
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(v) for v in row])
    return path


def _column(values: list[str]):
    try:
        return np.array([float(v) for v in values])
    except ValueError:
        if all(v in ("true", "false") for v in values):
            return np.array([v == "true" for v in values])
        return values


def read_csv(path: str | Path) -> dict[str, object]:
    """Read a table written by :func:`write_csv` into columns.

    Numeric columns come back as float arrays, ``true``/``false`` columns as
    boolean arrays, anything else as a list of strings.
    """
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    header, body = rows[0], rows[1:]
    return {name: _column([r[i] for r in body]) for i, name in enumerate(header)}
