"""Regulation-market backtest on a synthetic (or supplied) RegD signal.

Prints monthly credits per MW for each rating and writes them to
``monthly.csv``.  Prices default to the placeholder constants; pass a prices
CSV (``window_start, rccp, rpcp``) to use cleared prices instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from asgffr.control import AsgParams
from asgffr.io import write_csv
from asgffr.market import (ClearingPrices, MarketDataset, RegulationConfig,
                           generate_synthetic_regd, monthly_revenue, read_prices_csv,
                           read_regd_csv)

from _args import parse_into


@dataclass
class BacktestConfig:
    ratings: tuple = (2.0, 5.0, 10.0)
    days: float = 30.0
    seed: int = 2023
    ramp_limit: float = 0.1
    deadband: float = 0.2
    rho: float = 0.76
    rccp: float = 0.5
    rpcp: float = 0.05
    regd_csv: str = ""
    prices_csv: str = ""
    mode: str = "quasi_steady"
    out: str = "results/market_backtest"


def main(cfg: BacktestConfig) -> None:
    signal = (read_regd_csv(cfg.regd_csv) if cfg.regd_csv
              else generate_synthetic_regd(cfg.seed, cfg.days * 86400.0))
    prices = (read_prices_csv(cfg.prices_csv) if cfg.prices_csv
              else ClearingPrices.constant(cfg.rccp, cfg.rpcp))
    data = MarketDataset(signal, prices)
    table = {"month": [], "rating_mw": [], "windows": [], "credit": [], "credit_per_mw": []}
    for r in cfg.ratings:
        stmt = monthly_revenue(data, RegulationConfig(r, cfg.ramp_limit, cfg.deadband, cfg.rho),
                               AsgParams(), cfg.mode)
        for m in stmt.monthly:
            for k in table:
                table[k].append(r if k == "rating_mw" else m[k])
            print(f"{m['month']}  {r:5.1f} MW  {m['credit_per_mw']:10.2f} $/MW"
                  f"  ({m['windows']} windows)")
    write_csv(Path(cfg.out) / "monthly.csv", table)


if __name__ == "__main__":
    main(parse_into(BacktestConfig, __doc__.splitlines()[0]))
