"""Cash-flow forecast: NPV over discount rates, IRR versus capital cost and
break-even years.  Writes ``npv.csv``, ``irr_curve.csv`` and ``cashflow.csv``."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from asgffr.finance import (FinanceAssumptions, break_even_year, build_schedule,
                            cumulative_cashflow, irr_vs_capital_cost, npv)
from asgffr.io import write_csv

from _args import parse_into


@dataclass
class ForecastConfig:
    revenue0: float = 81_578.0
    growth: float = 0.06
    om_rate: float = 0.02
    inv_cost: float = 137_500.0
    horizon: int = 15
    periods_per_year: int = 12
    om_scales_with_cost: bool = True
    cost_factors: tuple = (1.0, 2.0, 3.0, 4.0, 5.0)
    out: str = "results/finance_forecast"


def main(cfg: ForecastConfig) -> None:
    a = FinanceAssumptions(cfg.revenue0, cfg.growth, cfg.om_rate, cfg.inv_cost, cfg.horizon,
                           periods_per_year=cfg.periods_per_year,
                           om_scales_with_cost=cfg.om_scales_with_cost)
    s = build_schedule(a)
    out = Path(cfg.out)
    rates = np.round(np.arange(0.0, 0.305, 0.01), 2)
    write_csv(out / "npv.csv", {"rate": rates, "npv": [npv(s, r) for r in rates]})
    curve = irr_vs_capital_cost(a, cfg.cost_factors)
    write_csv(out / "irr_curve.csv", {"factor": [f for f, _ in curve], "irr": [v for _, v in curve]})
    cash = {"year": np.arange(cfg.horizon + 1)}
    for k in cfg.cost_factors:
        cash[f"cumulative_x{k:g}"] = cumulative_cashflow(build_schedule(a.with_updates(cost_factor=k)))
    write_csv(out / "cashflow.csv", cash)

    print(f"NPV at 6 %: {npv(s, 0.06):,.0f} $/MW   at 20 %: {npv(s, 0.20):,.0f} $/MW")
    print(f"revenue in year {cfg.horizon}: {s.revenue[-1]:,.0f} $/MW")
    for f, v in curve:
        be = break_even_year(build_schedule(a.with_updates(cost_factor=f)))
        print(f"capital x{f:g}: IRR {v:.3f}, break-even year {be}")


if __name__ == "__main__":
    main(parse_into(ForecastConfig, __doc__.splitlines()[0]))
