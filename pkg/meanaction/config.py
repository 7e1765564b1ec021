from __future__ import annotations

import os
from dataclasses import dataclass, field, replace
from typing import Mapping, Tuple

try:
    import tomllib  # type: ignore[attr-defined]
except ModuleNotFoundError:  # pragma: no cover
    import tomli as tomllib  # type: ignore[no-redef]


QUADRATURE_RULES = ("simpson", "gauss-legendre")
PRECISION_MODES = ("double", "mpmath")
OUTPUT_FORMATS = ("json", "csv", "table")


@dataclass(frozen=True)
class QuadratureSettings:
    rule: str = "simpson"
    line_order: int = 32
    sweep_order: int = 4
    area_grid: Tuple[int, int] = (512, 512)
    tol: float = 1e-9
    fd_step: float = 1e-6
    max_refinements: int = 12

    def __post_init__(self) -> None:
        if self.rule not in QUADRATURE_RULES:
            raise ValueError(f"Unknown quadrature rule {self.rule!r}")
        nx, ny = self.area_grid
        if nx < 2 or ny < 2:
            raise ValueError("area grid needs at least 2 nodes per axis")


@dataclass(frozen=True)
class IntegratorSettings:
    step: float = 0.01
    solver_tol: float = 1e-14
    max_iter: int = 50


@dataclass(frozen=True)
class NewtonSettings:
    max_iter: int = 50
    tol: float = 1e-11
    damping: float = 0.5


@dataclass(frozen=True)
class SearchSettings:
    q_max: int = 4
    seed_grid: Tuple[int, int] = (64, 64)
    newton: NewtonSettings = field(default_factory=NewtonSettings)
    dedupe_tol: float = 1e-7
    family_tol: float = 1e-6


@dataclass(frozen=True)
class EchSettings:
    guard_eps: float = 1e-9
    precision: str = "double"
    digits: int = 50
    rational_max_denominator: int = 1_000_000

    def __post_init__(self) -> None:
        if self.precision not in PRECISION_MODES:
            raise ValueError(f"Unknown precision mode {self.precision!r}")


@dataclass(frozen=True)
class RunSettings:
    threads: int = 0
    seed: int = 20240611
    output_format: str = "json"

    def __post_init__(self) -> None:
        if self.output_format not in OUTPUT_FORMATS:
            raise ValueError(f"Unknown output format {self.output_format!r}")


@dataclass(frozen=True)
class AppConfig:
    quadrature: QuadratureSettings = field(default_factory=QuadratureSettings)
    integrator: IntegratorSettings = field(default_factory=IntegratorSettings)
    search: SearchSettings = field(default_factory=SearchSettings)
    ech: EchSettings = field(default_factory=EchSettings)
    run: RunSettings = field(default_factory=RunSettings)

    def with_quadrature(self, **changes: object) -> "AppConfig":
        return replace(self, quadrature=replace(self.quadrature, **changes))


def _read_toml(path: str) -> Mapping[str, object]:
    with open(path, "rb") as f:
        return tomllib.load(f)


def _section(raw: Mapping[str, object], name: str) -> Mapping[str, object]:
    data = raw.get(name, {})
    return data if isinstance(data, Mapping) else {}


def _load_quadrature(data: Mapping[str, object]) -> QuadratureSettings:
    defaults = QuadratureSettings()
    return QuadratureSettings(
        rule=str(data.get("rule", defaults.rule)),
        line_order=int(data.get("line_order", defaults.line_order)),
        sweep_order=int(data.get("sweep_order", defaults.sweep_order)),
        area_grid=(
            int(data.get("area_nx", defaults.area_grid[0])),
            int(data.get("area_ny", defaults.area_grid[1])),
        ),
        tol=float(data.get("tol", defaults.tol)),
        fd_step=float(data.get("fd_step", defaults.fd_step)),
        max_refinements=int(data.get("max_refinements", defaults.max_refinements)),
    )


def _load_integrator(data: Mapping[str, object]) -> IntegratorSettings:
    defaults = IntegratorSettings()
    return IntegratorSettings(
        step=float(data.get("step", defaults.step)),
        solver_tol=float(data.get("solver_tol", defaults.solver_tol)),
        max_iter=int(data.get("max_iter", defaults.max_iter)),
    )


def _load_search(data: Mapping[str, object]) -> SearchSettings:
    defaults = SearchSettings()
    newton = NewtonSettings(
        max_iter=int(data.get("max_iter", defaults.newton.max_iter)),
        tol=float(data.get("newton_tol", defaults.newton.tol)),
        damping=float(data.get("damping", defaults.newton.damping)),
    )
    return SearchSettings(
        q_max=int(data.get("q_max", defaults.q_max)),
        seed_grid=(int(data.get("seed_nx", defaults.seed_grid[0])), int(data.get("seed_ny", defaults.seed_grid[1]))),
        newton=newton,
        dedupe_tol=float(data.get("dedupe_tol", defaults.dedupe_tol)),
        family_tol=float(data.get("family_tol", defaults.family_tol)),
    )


def _load_ech(data: Mapping[str, object]) -> EchSettings:
    defaults = EchSettings()
    return EchSettings(
        guard_eps=float(os.getenv("MEANACTION_GUARD_EPS", str(data.get("guard_eps", defaults.guard_eps)))),
        precision=str(data.get("precision", defaults.precision)),
        digits=int(data.get("digits", defaults.digits)),
        rational_max_denominator=int(data.get("rational_max_denominator", defaults.rational_max_denominator)),
    )


def _load_run(data: Mapping[str, object]) -> RunSettings:
    defaults = RunSettings()
    return RunSettings(
        threads=int(os.getenv("MEANACTION_THREADS", str(data.get("threads", defaults.threads)))),
        seed=int(os.getenv("MEANACTION_SEED", str(data.get("seed", defaults.seed)))),
        output_format=os.getenv("MEANACTION_FORMAT", str(data.get("format", defaults.output_format))),
    )


def default_config() -> AppConfig:
    return _from_mapping({})


def _from_mapping(raw: Mapping[str, object]) -> AppConfig:
    return AppConfig(
        quadrature=_load_quadrature(_section(raw, "quadrature")),
        integrator=_load_integrator(_section(raw, "integrator")),
        search=_load_search(_section(raw, "search")),
        ech=_load_ech(_section(raw, "ech")),
        run=_load_run(_section(raw, "run")),
    )


def load_config(path: str) -> AppConfig:
    if not os.path.exists(path):
        return default_config()
    return _from_mapping(_read_toml(path))
