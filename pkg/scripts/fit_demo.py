"""Identify the controller gains from a synthetic reference response.

The reference comes from the nominal gains, optionally with white noise; the
search starts from the nominal gains times ``start_factor``.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from asgffr.control import AsgParams, simulate_asg
from asgffr.fitting import (PARAM_NAMES, asg_fit_problem, fit_parameters, identification_profile,
                            theta_of)
from asgffr.io import write_json

from _args import parse_into


@dataclass
class FitConfig:
    start_factor: float = 1.5
    noise: float = 0.0
    seed: int = 0
    restarts: int = 3
    out: str = "results/fit_demo"


def main(cfg: FitConfig) -> None:
    truth = AsgParams(deadband_signal="mv")
    prof = identification_profile()
    ref = simulate_asg(truth, prof["f_mv"], prof["f_lv_ref"], 0.01)["p_asg"]
    if cfg.noise > 0:
        rng = np.random.default_rng(cfg.seed)
        ref = ref + cfg.noise * np.sqrt(np.mean(ref ** 2)) * rng.standard_normal(ref.size)
    problem = asg_fit_problem(prof["time"], prof["f_mv"], prof["f_lv_ref"], ref, truth)
    t0 = time.perf_counter()
    res = fit_parameters(problem, theta_of(truth) * cfg.start_factor, restarts=cfg.restarts)
    elapsed = time.perf_counter() - t0
    rel = res.theta / theta_of(truth) - 1
    for name, v, e in zip(PARAM_NAMES, res.theta, rel):
        print(f"{name:>6} {v:12.6g}  rel. error {e:+.2e}")
    print(f"RMSD / signal RMS = {res.rmsd / problem.signal_rms:.2e}"
          f" after {res.evaluations} evaluations ({elapsed:.1f} s)")
    write_json(Path(cfg.out) / "fit.json", {**res.as_dict(), "relative_error":
                                            dict(zip(PARAM_NAMES, rel)), "config": vars(cfg)})


if __name__ == "__main__":
    main(parse_into(FitConfig, __doc__.splitlines()[0]))
