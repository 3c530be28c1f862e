"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Every key must be one of the
:class:`RunConfig` fields; ``eps_list`` takes a comma-separated list.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, fields
from pathlib import Path

from .model import DomainParams, MarketParams, RegularizationParams
from .spatial import Grid, make_grid

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config"]


class ConfigError(ValueError):
    """Invalid or unknown configuration entry."""


@dataclass(frozen=True)
class RunConfig:
    # market
    sigma: float = 0.2
    r: float = 0.1
    q: float = 0.0
    a: float = 0.02
    K: float = 1.0
    T: float = 0.5
    # domain and regularisation
    b: float = 4.0
    eps: float = 1e-3
    half_width: float | None = None
    # solver
    nx: int = 801
    nt: int = 500
    grid: str = "uniform"
    grade_ratio: float = 1.05
    tol_newton: float = 1e-10
    max_iter: int = 30
    dt_out: float = 0.05
    # sweep
    eps_list: tuple[float, ...] = (0.2, 0.1, 0.05, 0.025)
    # psi table
    A_max: float = 50.0
    psi_n: int = 1000
    psi_tol: float = 1e-9
    out: str = "out"

    def __post_init__(self):
        self.validate()

    @property
    def market(self) -> MarketParams:
        return MarketParams(self.sigma, self.r, self.q, self.a, self.K, self.T)

    @property
    def domain(self) -> DomainParams:
        return DomainParams(self.b)

    @property
    def regularization(self) -> RegularizationParams:
        return RegularizationParams(self.eps, self.half_width)

    @property
    def width(self) -> float:
        return self.regularization.width

    def build_grid(self) -> Grid:
        return make_grid(self.nx, self.b, self.grid, self.K, self.width, self.grade_ratio)

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)

    def validate(self) -> None:
        def need(cond, key, msg):
            if not cond:
                raise ConfigError(f"{key}: {msg}")

        try:
            market = self.market
        except ValueError as exc:
            raise ConfigError(str(exc)) from None
        try:
            reg = self.regularization
        except ValueError as exc:
            raise ConfigError(f"eps: {exc}") from None
        need(self.b > market.K, "b", "must exceed K")
        need(reg.width < market.K, "eps", "smoothing half-width must be smaller than K")
        need(market.K + reg.width < self.b, "eps", "smoothing band must end before b")
        need(self.nx >= 3, "nx", "need at least 3 nodes")
        need(self.nt >= 1, "nt", "need at least 1 step")
        need(self.grid in ("uniform", "graded"), "grid", "must be 'uniform' or 'graded'")
        need(self.grade_ratio >= 1.0, "grade_ratio", "must be >= 1")
        need(self.tol_newton > 0, "tol_newton", "must be positive")
        need(self.max_iter >= 1, "max_iter", "must be >= 1")
        need(self.dt_out >= 0, "dt_out", "must be >= 0")
        need(all(e > 0 for e in self.eps_list), "eps_list", "entries must be positive")
        need(
            all(x > y for x, y in zip(self.eps_list, self.eps_list[1:])),
            "eps_list",
            "must be strictly decreasing",
        )
        need(self.A_max > 0, "A_max", "must be positive")
        need(self.psi_n >= 2, "psi_n", "must be >= 2")
        need(self.psi_tol > 0, "psi_tol", "must be positive")


_FIELDS = {f.name: f for f in fields(RunConfig)}


def _convert(key: str, raw: str):
    kind = _FIELDS[key].type
    try:
        if key == "eps_list":
            return tuple(float(s) for s in raw.split(",") if s.strip())
        if key == "half_width":
            return None if raw.lower() in ("", "none") else float(raw)
        if kind == "int":
            return int(raw)
        if kind == "float":
            return float(raw)
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r}") from None


def parse_config(text: str, **overrides) -> RunConfig:
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _FIELDS:
            raise ConfigError(f"{key}: unknown key")
        values[key] = _convert(key, raw)
    values.update({k: v for k, v in overrides.items() if v is not None})
    return RunConfig(**values)


def load_config(path: str | Path | None, **overrides) -> RunConfig:
    text = "" if path is None else Path(path).read_text()
    return parse_config(text, **overrides)
