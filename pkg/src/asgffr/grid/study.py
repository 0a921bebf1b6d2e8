"""Base case versus ASG ratings: nadir, energy and dominant-mode comparison."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..control import AsgParams, grid_power_base
from ..errors import NumericalError
from ..modal import ModalEstimate, dominant_mode, prony_fit, window_from_series
from .dynamics import AsgAttachment, DisturbanceSpec, SimResult, run
from .metrics import ResponseMetrics, compute_metrics
from .network import GridModel, build_ieee9, load_grid_file
from .powerflow import solve_power_flow


@dataclass
class ScenarioOutcome:
    name: str
    rating: float
    result: SimResult
    metrics: ResponseMetrics
    modes: list[ModalEstimate]

    @property
    def dominant(self) -> ModalEstimate:
        return dominant_mode(self.modes)


def grid_asg_params(params: AsgParams, rating: float, design_rocof: float) -> AsgParams:
    """Grid-support controller for ``rating`` MW: MV-gated, sized by RoCoF."""
    p = params.with_updates(deadband_signal="mv")
    return p.with_updates(Prated=grid_power_base(rating, p, design_rocof) if rating > 0 else 0.0)


def scenario_modes(time, freq, t_from: float, t_to: float, step: float,
                   order: int) -> list[ModalEstimate]:
    """Prony modes of a frequency trace, detrended by its final value."""
    return prony_fit(window_from_series(time, freq, t_from, t_to, step=step), order)


def run_study(ratings, params: AsgParams, model: GridModel | None = None,
              disturbance: DisturbanceSpec | None = None, *, dt: float = 0.005,
              horizon: float = 60.0, design_rocof: float = 0.05, asg_bus: int = 5,
              metric_bus: int = 6, filter_tc: float = 0.05, substeps: int = 10,
              modal_window: tuple[float, float] = (1.5, 41.0), modal_step: float = 0.1,
              order: int = 2) -> list[ScenarioOutcome]:
    """Base case plus one run per rating, in the order given."""
    model = model or build_ieee9()
    disturbance = disturbance or DisturbanceSpec()
    op = solve_power_flow(model)
    base = run(model, disturbance, None, dt, horizon, op)
    out = []
    for name, rating in [("base", 0.0)] + [(f"{r:g}MW", float(r)) for r in ratings]:
        if rating == 0.0:
            res = base
        else:
            att = AsgAttachment(grid_asg_params(params, rating, design_rocof), asg_bus,
                                filter_tc=filter_tc, substeps=substeps)
            res = run(model, disturbance, att, dt, horizon, op)
        if not res.stable:
            raise NumericalError(f"scenario {name}: {res.message}")
        metrics = compute_metrics(res, base, metric_bus)
        modes = scenario_modes(res.time, res.freq_at(metric_bus), *modal_window, modal_step, order)
        out.append(ScenarioOutcome(name, rating, res, metrics, modes))
    return out


def study_from_config(cfg) -> list[ScenarioOutcome]:
    """Run :func:`run_study` with the settings of a :class:`ScenarioConfig`."""
    g = cfg.grid
    model = build_ieee9(g.machines or None) if g.model == "ieee9" else load_grid_file(cfg.resolve(g.model))
    return run_study(cfg.ratings, cfg.asg, model, g.disturbance, dt=g.dt, horizon=g.horizon,
                     design_rocof=g.design_rocof, asg_bus=g.asg_bus, metric_bus=g.metric_bus,
                     filter_tc=g.filter_tc, substeps=g.substeps,
                     modal_window=(cfg.modal.t_from, cfg.modal.t_to), modal_step=cfg.modal.step,
                     order=cfg.modal.order)


def trend_table(outcomes: list[ScenarioOutcome]) -> list[dict]:
    rows = []
    for o in outcomes:
        d = o.dominant
        rows.append({"scenario": o.name, "rating_mw": o.rating, **o.metrics.as_dict(),
                     "sigma": d.sigma, "omega": d.omega, "f_mode": d.f_mode, "zeta": d.zeta,
                     "max_p_asg": float(np.nanmax(np.abs(o.result.p_asg)))})
    return rows
