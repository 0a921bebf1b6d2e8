import time

import pytest

from asgffr.control import AsgParams, simulate_asg
from asgffr.fitting import asg_fit_problem, fit_parameters, identification_profile, theta_of
from asgffr.grid.study import run_study

_RESULTS_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_RESULTS_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one pass/fail line per acceptance criterion."""
    results = request.config.stash[_RESULTS_KEY]

    def record(number: int, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {detail}"
        results.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(_RESULTS_KEY, [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(results):
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def grid_study():
    """Base case and the 2/5/10 MW scenarios with default settings, timed."""
    params = AsgParams(deadband_signal="mv", gate_hysteresis=0.02)
    t0 = time.perf_counter()
    outcomes = run_study((2.0, 5.0, 10.0), params)
    return outcomes, time.perf_counter() - t0


@pytest.fixture(scope="session")
def noiseless_fit():
    """Self-recovery of the reference gains from a start at 1.5x, timed."""
    truth = AsgParams(deadband_signal="mv")
    prof = identification_profile()
    dt = float(prof["time"][1] - prof["time"][0])
    t0 = time.perf_counter()
    ref = simulate_asg(truth, prof["f_mv"], prof["f_lv_ref"], dt)["p_asg"]
    problem = asg_fit_problem(prof["time"], prof["f_mv"], prof["f_lv_ref"], ref, truth)
    result = fit_parameters(problem, theta_of(truth) * 1.5)
    return truth, problem, result, time.perf_counter() - t0
