"""Command-line scenario runner.

Every command writes plain CSV/JSON artifacts below ``--out``.  Exit codes:
0 on success, 2 for configuration or input errors, 3 for numerical failures.
"""

from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, load_config
from .control import simulate_asg
from .errors import ConfigError, NumericalError
from .finance import (FinanceAssumptions, NoIrrError, break_even_year, build_schedule,
                      cumulative_cashflow, irr, npv)
from .fitting import PARAM_NAMES, asg_fit_problem, fit_parameters, identification_profile, theta_of
from .grid.study import scenario_modes, study_from_config
from .io import prepare_out_dir, read_csv, read_json, write_csv, write_json, write_manifest
from .market import (WINDOW_S, ClearingPrices, MarketDataset, RegulationConfig,
                     generate_synthetic_regd, monthly_revenue, read_prices_csv, read_regd_csv,
                     rescale_regd, simulate_regulation)


YEAR_S = 365.25 * 86400.0


def _rating_name(r: float) -> str:
    return f"{r:g}MW"


# ---------------------------------------------------------------------------
# commands: each returns the list of files it wrote

def cmd_simulate(cfg: ScenarioConfig, out: Path) -> list[Path]:
    """Base case plus one run per rating: frequency and power traces, metrics."""
    outcomes = study_from_config(cfg)
    files, table = [], []
    for o in outcomes:
        res = o.result
        cols = {"time": res.time}
        cols.update({f"f_bus{b}": res.bus_freq[k] for k, b in enumerate(res.bus_ids)})
        files.append(write_csv(out / f"freq_{o.name}.csv", cols))
        files.append(write_csv(out / f"p_asg_{o.name}.csv", {"time": res.time, "p_asg_mw": res.p_asg}))
        table.append({"scenario": o.name, "rating_mw": o.rating, **o.metrics.as_dict()})
    files.append(write_json(out / "metrics.json", {"metric_bus": cfg.grid.metric_bus,
                                                   "scenarios": table}))
    return files


def cmd_prony(series: Path, column: str, out_file: Path, order: int, t_from: float,
              t_to: float, step: float | None) -> list[Path]:
    """Prony modes of one CSV column."""
    if order < 2 or order % 2:
        raise ConfigError(f"order must be an even integer >= 2, got {order}")
    data = read_csv(series)
    if "time" not in data or column not in data:
        raise ConfigError(f"{series}: needs columns 'time' and {column!r}")
    modes = scenario_modes(data["time"], data[column], t_from, t_to, step, order)
    doc = {"series": series.name, "column": column, "order": order, "window": [t_from, t_to],
           "step": step, "modes": [m.as_dict() for m in modes]}
    return [write_json(out_file, doc)]


def _market_dataset(cfg: ScenarioConfig) -> MarketDataset:
    m = cfg.market
    if m.regd_csv is not None:
        signal = read_regd_csv(cfg.resolve(m.regd_csv))
    else:
        signal = generate_synthetic_regd(cfg.seed, m.synthetic_days * 86400.0)
    if m.prices_csv is not None:
        prices = read_prices_csv(cfg.resolve(m.prices_csv))
    else:
        prices = ClearingPrices.constant(m.rccp, m.rpcp)
    return MarketDataset(signal, prices)


def cmd_market(cfg: ScenarioConfig, out: Path) -> list[Path]:
    """Backtest every rating; per-window credits, monthly totals, response trace."""
    m = cfg.market
    data = _market_dataset(cfg)
    files, monthly = [], {}
    n_trace = min(len(data.signal), int(round(m.trace_minutes * 30)))
    trace = {"epoch_s": data.signal.timestamps[:n_trace], "regd": data.signal.regd[:n_trace],
             "f_set_hz": rescale_regd(data.signal.regd[:n_trace], m.f_shift_max, m.f0) * m.f0}
    for r in cfg.ratings:
        rc = RegulationConfig(r, m.ramp_limit, m.deadband, m.rho, m.f_shift_max, m.f0)
        stmt = monthly_revenue(data, rc, cfg.asg, m.mode)
        name = _rating_name(r)
        files.append(write_csv(out / f"credits_{name}.csv", {
            "window_start": stmt.window_start.astype(np.int64), "mileage_mw": stmt.mileage_mw,
            "beta": stmt.beta, "rccp": stmt.rccp, "rpcp": stmt.rpcp, "credit": stmt.credit}))
        # scale by the settled duration so partial months annualize correctly
        covered = stmt.window_start.size * WINDOW_S
        monthly[name] = {"rating_mw": r, "months": stmt.monthly, "total": stmt.total,
                         "annualized_per_mw": stmt.total / r * YEAR_S / covered}
        if n_trace:
            short = dataclasses.replace(data.signal, timestamps=data.signal.timestamps[:n_trace],
                                        regd=data.signal.regd[:n_trace],
                                        rega=None if data.signal.rega is None
                                        else data.signal.rega[:n_trace])
            trace[f"p_{name}"] = simulate_regulation(short, rc, cfg.asg, m.mode)
    files.append(write_json(out / "monthly.json", {"ratings": monthly,
                                                   "prices": data.prices.granularity}))
    if n_trace:
        files.append(write_csv(out / "trace.csv", trace))
    return files


def _finance_cases(cfg: ScenarioConfig, monthly: dict | None) -> dict[str, float]:
    f = cfg.finance
    if f.revenue0 != "market":
        return {"configured": float(f.revenue0)}
    if monthly is None:
        raise ConfigError('finance.revenue0 = "market" needs market results (monthly.json)')
    return {name: float(v["annualized_per_mw"]) for name, v in sorted(monthly["ratings"].items())}


def _irr_or_none(schedule, failures: list[str], label: str) -> float | None:
    try:
        return irr(schedule)
    except NoIrrError as exc:
        failures.append(f"{label}: {exc}")
        return None


def cmd_finance(cfg: ScenarioConfig, out: Path, monthly: dict | None = None) -> list[Path]:
    """Cash flows, NPV/IRR and the IRR-versus-capital-cost curve per revenue case.

    A missing IRR is written as null; the command then fails with a numerical
    error after all artifacts are on disk.
    """
    f = cfg.finance
    summary, cash, curve = {}, {}, {"factor": list(f.cost_factors)}
    failures: list[str] = []
    for case, rev in _finance_cases(cfg, monthly).items():
        a = FinanceAssumptions(rev, f.growth, f.om_rate, f.inv_cost, f.horizon, f.discount,
                               1.0, 1.0, f.periods_per_year, f.om_scales_with_cost)
        sched = build_schedule(a)
        ann = sched.annual()
        if not cash:
            cash["year"] = np.arange(ann.size)
        cash[f"revenue_{case}"] = np.concatenate([[0.0], sched.revenue])
        cash[f"om_{case}"] = np.concatenate([[0.0], sched.om])
        cash[f"cf_{case}"] = ann
        cash[f"cumulative_{case}"] = cumulative_cashflow(sched)
        scaled = {k: build_schedule(dataclasses.replace(a, cost_factor=k)) for k in f.cost_factors}
        curve[f"irr_{case}"] = [_irr_or_none(sc, failures, f"{case} x{k:g}")
                                for k, sc in scaled.items()]
        summary[case] = {
            "revenue0": rev, "irr": _irr_or_none(sched, failures, case),
            "npv": {f"{r:g}": npv(sched, r) for r in f.npv_rates},
            "revenue_final_year": float(sched.revenue[-1]),
            "break_even_year": {f"{k:g}": break_even_year(sc) for k, sc in scaled.items()},
        }
    files = [write_json(out / "npv_irr.json", {"cases": summary,
                                               "assumptions": dataclasses.asdict(f)}),
             write_csv(out / "cashflow.csv", cash),
             write_csv(out / "irr_curve.csv", curve)]
    if failures:
        raise NumericalError("no IRR for " + "; ".join(failures))
    return files


def cmd_fit(cfg: ScenarioConfig, out: Path) -> list[Path]:
    """Identify the controller gains from a reference response."""
    fc = cfg.fit
    base = cfg.asg.with_updates(Prated=1.0)
    truth = None
    if fc.reference_csv is not None:
        ref = read_csv(cfg.resolve(fc.reference_csv))
        missing = {"time", "f_mv", "f_lv_ref", "p"} - set(ref)
        if missing:
            raise ConfigError(f"reference CSV lacks columns {sorted(missing)}")
        time, f_mv, f_ref, p = ref["time"], ref["f_mv"], ref["f_lv_ref"], ref["p"]
    else:
        prof = identification_profile(fc.dt, fc.duration, base.f0, base.f_lv_nom)
        time, f_mv, f_ref = prof["time"], prof["f_mv"], prof["f_lv_ref"]
        p = simulate_asg(base, f_mv, f_ref, fc.dt)["p_asg"]
        truth = theta_of(base)
        if fc.noise > 0:
            rng = np.random.default_rng(cfg.seed)
            p = p + fc.noise * float(np.sqrt(np.mean(p ** 2))) * rng.standard_normal(p.size)
    problem = asg_fit_problem(time, f_mv, f_ref, p, base)
    result = fit_parameters(problem, theta_of(base) * fc.start_factor, restarts=fc.restarts)
    doc = {**result.as_dict(), "relative_rmsd": result.rmsd / problem.signal_rms,
           "start_factor": fc.start_factor, "noise": fc.noise}
    if truth is not None:
        doc["truth"] = dict(zip(PARAM_NAMES, truth))
        doc["relative_error"] = dict(zip(PARAM_NAMES, result.theta / truth - 1.0))
    return [write_csv(out / "reference.csv", {"time": time, "f_mv": f_mv, "f_lv_ref": f_ref, "p": p}),
            write_json(out / "fit.json", doc)]


def cmd_pipeline(cfg: ScenarioConfig, out: Path) -> list[Path]:
    """simulate, prony per scenario, market, finance, then a manifest."""
    files: list[Path] = []

    def stage(name, fn):
        try:
            return fn()
        except (ConfigError, NumericalError) as exc:
            raise type(exc)(f"stage '{name}' failed: {exc}") from exc

    files += stage("simulate", lambda: cmd_simulate(cfg, out / "simulate"))
    for f in sorted(out.glob("simulate/freq_*.csv")):
        name = f.stem.removeprefix("freq_")
        files += stage("prony", lambda: cmd_prony(
            f, f"f_bus{cfg.grid.metric_bus}", out / "prony" / f"modes_{name}.json",
            cfg.modal.order, cfg.modal.t_from, cfg.modal.t_to, cfg.modal.step))
    files += stage("market", lambda: cmd_market(cfg, out / "market"))
    monthly = read_json(out / "market" / "monthly.json")
    files += stage("finance", lambda: cmd_finance(cfg, out / "finance", monthly))
    files.append(write_manifest(out, files, {"seed": cfg.seed, "version": __version__}))
    return files


# ---------------------------------------------------------------------------
# argument handling

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="asgffr", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", type=Path, help="scenario TOML (default: bundled scenario)")
        p.add_argument("--out", type=Path, help="output directory (default: config 'out')")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--overwrite", action="store_true", help="replace a non-empty output directory")
        return p

    common(sub.add_parser("simulate", help="grid dynamic study for the base case and each rating"))
    p = common(sub.add_parser("prony", help="Prony modes of a CSV column"))
    p.add_argument("--series", type=Path, required=True, help="CSV with a 'time' column")
    p.add_argument("--column", default=None, help="column to analyse (default: metric-bus frequency)")
    p.add_argument("--order", type=int, default=None)
    p.add_argument("--t-from", type=float, default=None)
    p.add_argument("--t-to", type=float, default=None)
    p.add_argument("--step", type=float, default=None, help="decimation step in seconds")
    p = common(sub.add_parser("market", help="regulation-market backtest"))
    p.add_argument("--rating", type=float, action="append", help="MW; repeat for several")
    p.add_argument("--ramp-limit", type=float)
    p.add_argument("--deadband", type=float)
    p.add_argument("--rho", type=float)
    p = common(sub.add_parser("finance", help="NPV, IRR and cash-flow forecast"))
    p.add_argument("--monthly", type=Path, help="monthly.json from a market run")
    p.add_argument("--revenue0", type=float, help="first-year revenue in $/MW")
    common(sub.add_parser("fit", help="identify controller gains from a reference response"))
    common(sub.add_parser("pipeline", help="simulate, prony, market and finance in one run"))
    return parser


def _apply_overrides(cfg: ScenarioConfig, args) -> ScenarioConfig:
    cfg = cfg.with_seed(args.seed)
    if args.command == "market":
        changes = {k: v for k, v in (("ramp_limit", args.ramp_limit), ("deadband", args.deadband),
                                     ("rho", args.rho)) if v is not None}
        if changes:
            cfg = dataclasses.replace(cfg, market=dataclasses.replace(cfg.market, **changes))
        if args.rating:
            cfg = dataclasses.replace(cfg, ratings=tuple(args.rating))
    if args.command == "finance":
        if args.revenue0 is not None and args.monthly is not None:
            raise ConfigError("--revenue0 and --monthly are mutually exclusive")
        if args.revenue0 is not None:
            cfg = dataclasses.replace(cfg, finance=dataclasses.replace(cfg.finance,
                                                                       revenue0=args.revenue0))
        if args.monthly is not None:
            cfg = dataclasses.replace(cfg, finance=dataclasses.replace(cfg.finance,
                                                                       revenue0="market"))
    return cfg


def run_command(args) -> list[Path]:
    cfg = _apply_overrides(load_config(args.config), args)
    out = prepare_out_dir(args.out if args.out is not None else Path(cfg.out), args.overwrite)
    if args.command == "simulate":
        return cmd_simulate(cfg, out)
    if args.command == "prony":
        return cmd_prony(args.series, args.column or f"f_bus{cfg.grid.metric_bus}",
                         out / "modes.json",
                         args.order if args.order is not None else cfg.modal.order,
                         args.t_from if args.t_from is not None else cfg.modal.t_from,
                         args.t_to if args.t_to is not None else cfg.modal.t_to,
                         args.step if args.step is not None else cfg.modal.step)
    if args.command == "market":
        return cmd_market(cfg, out)
    if args.command == "finance":
        monthly = read_json(args.monthly) if args.monthly is not None else None
        return cmd_finance(cfg, out, monthly)
    if args.command == "fit":
        return cmd_fit(cfg, out)
    return cmd_pipeline(cfg, out)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        files = run_command(args)
    except ConfigError as exc:
        print(f"asgffr: configuration error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"asgffr: numerical failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"asgffr: invalid input: {exc}", file=sys.stderr)
        return 2
    for f in files:
        print(f)
    return 0


if __name__ == "__main__":
    sys.exit(main())
