"""Scenario configuration read from TOML.

Unknown keys are rejected so that typos fail loudly.  Relative file paths
are resolved against the directory of the configuration file.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .control import AsgParams
from .errors import ConfigError
from .grid.dynamics import DisturbanceSpec


@dataclass(frozen=True)
class GridSection:
    model: str = "ieee9"              # "ieee9" or a path to a grid TOML file
    dt: float = 0.005
    horizon: float = 60.0
    design_rocof: float = 0.05        # Hz/s, sizes the power base per rating
    asg_bus: int = 5
    metric_bus: int = 6
    filter_tc: float = 0.05
    substeps: int = 10
    disturbance: DisturbanceSpec = DisturbanceSpec()
    machines: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not 0 < self.dt <= 0.01:
            raise ConfigError("grid.dt must lie in (0, 0.01] s")
        if not self.horizon > self.disturbance.t_apply:
            raise ConfigError("grid.horizon must extend past the disturbance")
        if not self.design_rocof > 0:
            raise ConfigError("grid.design_rocof must be positive")
        if self.substeps < 1:
            raise ConfigError("grid.substeps must be >= 1")


@dataclass(frozen=True)
class ModalSection:
    t_from: float = 1.5
    t_to: float = 41.0
    step: float = 0.1
    order: int = 2

    def __post_init__(self) -> None:
        if not self.t_to > self.t_from >= 0:
            raise ConfigError("modal window must satisfy 0 <= t_from < t_to")
        if self.order < 2 or self.order % 2:
            raise ConfigError("modal.order must be an even integer >= 2")
        if not self.step > 0:
            raise ConfigError("modal.step must be positive")


@dataclass(frozen=True)
class MarketSection:
    regd_csv: str | None = None       # epoch_s, regd, rega; synthetic when absent
    prices_csv: str | None = None     # window_start, rccp, rpcp; constant prices when absent
    synthetic_days: float = 30.0
    rccp: float = 0.5                 # $/MW per window (placeholder)
    rpcp: float = 0.05                # $/delta-MW per window (placeholder)
    ramp_limit: float = 0.1           # MW/s
    deadband: float = 0.2
    rho: float = 0.76
    f_shift_max: float = 1.0
    f0: float = 60.0
    mode: str = "quasi_steady"
    trace_minutes: float = 30.0       # length of the plot-ready response trace

    def __post_init__(self) -> None:
        if not self.synthetic_days > 0:
            raise ConfigError("market.synthetic_days must be positive")
        if self.rccp < 0 or self.rpcp < 0:
            raise ConfigError("market prices must be non-negative")
        if self.mode not in ("quasi_steady", "dynamic"):
            raise ConfigError("market.mode must be 'quasi_steady' or 'dynamic'")
        if self.trace_minutes < 0:
            raise ConfigError("market.trace_minutes must be non-negative")


@dataclass(frozen=True)
class FinanceSection:
    revenue0: float | str = 81_578.0  # $/MW/yr, or "market" to derive it per rating
    growth: float = 0.06
    om_rate: float = 0.02
    inv_cost: float = 137_500.0
    horizon: int = 15
    discount: float = 0.06
    periods_per_year: int = 12
    om_scales_with_cost: bool = True  # False: O&M stays on the base investment cost
    cost_factors: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    npv_rates: tuple = (0.06, 0.20)

    def __post_init__(self) -> None:
        if isinstance(self.revenue0, str):
            if self.revenue0 != "market":
                raise ConfigError('finance.revenue0 must be a number or "market"')
        elif not (math.isfinite(self.revenue0) and self.revenue0 >= 0):
            raise ConfigError("finance.revenue0 must be a finite, non-negative value")
        if not self.cost_factors or any(not f > 0 for f in self.cost_factors):
            raise ConfigError("finance.cost_factors must be a non-empty list of positive factors")
        if any(not r > -1 for r in self.npv_rates):
            raise ConfigError("finance.npv_rates must exceed -1")


@dataclass(frozen=True)
class FitSection:
    reference_csv: str | None = None  # time, f_mv, f_lv_ref, p; synthetic when absent
    start_factor: float = 1.5
    noise: float = 0.0                # relative to the reference RMS
    restarts: int = 3
    dt: float = 0.01
    duration: float = 6.0

    def __post_init__(self) -> None:
        if not self.start_factor > 0 or self.noise < 0 or self.restarts < 0:
            raise ConfigError("fit: start_factor > 0, noise >= 0 and restarts >= 0 required")


@dataclass(frozen=True)
class ScenarioConfig:
    seed: int = 0
    out: str = "out"
    ratings: tuple = (2.0, 5.0, 10.0)
    asg: AsgParams = AsgParams(deadband_signal="mv", gate_hysteresis=0.02)
    grid: GridSection = GridSection()
    modal: ModalSection = ModalSection()
    market: MarketSection = MarketSection()
    finance: FinanceSection = FinanceSection()
    fit: FitSection = FitSection()
    base_dir: str = "."

    def __post_init__(self) -> None:
        if not self.ratings:
            raise ConfigError("ratings list must not be empty")
        if any(not (math.isfinite(r) and r > 0) for r in self.ratings):
            raise ConfigError("ratings must be positive MW values")

    def resolve(self, p: str | None) -> Path | None:
        if p is None:
            return None
        path = Path(p)
        return path if path.is_absolute() else Path(self.base_dir) / path

    def with_seed(self, seed: int | None) -> "ScenarioConfig":
        return self if seed is None else dataclasses.replace(self, seed=int(seed))


_ASG_KEYS = {f.name for f in dataclasses.fields(AsgParams)} - {"Prated", "deadband_signal"}


def _build(cls, table: dict, where: str, **fixed):
    if not isinstance(table, dict):
        raise ConfigError(f"[{where}] must be a table")
    names = {f.name for f in dataclasses.fields(cls)} - set(fixed)
    unknown = set(table) - names
    if unknown:
        raise ConfigError(f"[{where}] unknown keys: {sorted(unknown)}")
    kw = {}
    for k, v in table.items():
        kw[k] = tuple(v) if isinstance(v, list) else v
    try:
        return cls(**kw, **fixed)
    except TypeError as exc:
        raise ConfigError(f"[{where}] {exc}") from exc


def parse_config(doc: dict, base_dir: str | Path = ".") -> ScenarioConfig:
    doc = dict(doc)
    top = {k: doc.pop(k) for k in ("seed", "out") if k in doc}
    sections = {"asg", "grid", "modal", "market", "finance", "fit"}
    unknown = set(doc) - sections
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")

    asg_tab = dict(doc.get("asg", {}))
    ratings = tuple(float(r) for r in asg_tab.pop("ratings", (2.0, 5.0, 10.0)))
    bad = set(asg_tab) - _ASG_KEYS
    if bad:
        raise ConfigError(f"[asg] unknown keys: {sorted(bad)}")
    asg_kw = {"gate_hysteresis": 0.02, **{k: float(v) for k, v in asg_tab.items()}}
    asg = AsgParams(deadband_signal="mv", **asg_kw)

    grid_tab = dict(doc.get("grid", {}))
    dist = _build(DisturbanceSpec, grid_tab.pop("disturbance", {}), "grid.disturbance")
    machines = grid_tab.pop("machines", {})
    if not isinstance(machines, dict):
        raise ConfigError("[grid.machines] must be a table")
    grid = _build(GridSection, grid_tab, "grid", disturbance=dist, machines=dict(machines))

    cfg = ScenarioConfig(
        seed=int(top.get("seed", 0)), out=str(top.get("out", "out")), ratings=ratings, asg=asg,
        grid=grid,
        modal=_build(ModalSection, doc.get("modal", {}), "modal"),
        market=_build(MarketSection, doc.get("market", {}), "market"),
        finance=_build(FinanceSection, doc.get("finance", {}), "finance"),
        fit=_build(FitSection, doc.get("fit", {}), "fit"),
        base_dir=str(base_dir))
    for p in (cfg.market.regd_csv, cfg.market.prices_csv, cfg.fit.reference_csv):
        if p is not None and not cfg.resolve(p).is_file():
            raise ConfigError(f"referenced file not found: {cfg.resolve(p)}")
    if cfg.grid.model != "ieee9" and not cfg.resolve(cfg.grid.model).is_file():
        raise ConfigError(f"grid model file not found: {cfg.resolve(cfg.grid.model)}")
    return cfg


def load_config(path: str | Path | None = None) -> ScenarioConfig:
    """Read a scenario file; ``None`` gives the bundled default scenario."""
    if path is None:
        text = resources.files("asgffr").joinpath("data/default_scenario.toml").read_text()
        base = "."
    else:
        path = Path(path)
        if not path.is_file():
            raise ConfigError(f"config file not found: {path}")
        text, base = path.read_text(), path.parent
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"invalid TOML in {path or 'default scenario'}: {exc}") from exc
    return parse_config(doc, base)
