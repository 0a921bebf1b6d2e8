"""RMSD objective and derivative-free fitting of the controller gains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import minimize

from .control import AsgParams, simulate_asg

PARAM_NAMES = ("Kpgov", "Kigov", "Ta", "Dp", "Kpf")


def rmsd(y_exp, y_sim) -> float:
    """Root-mean-square deviation of two equal-length series."""
    a = np.asarray(y_exp, dtype=float)
    b = np.asarray(y_sim, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    if a.size == 0:
        raise ValueError("rmsd needs at least one sample")
    return float(np.sqrt(np.mean((a - b) ** 2)))


@dataclass
class FitProblem:
    """Reference series plus a simulator mapping a parameter vector to a
    series on the same grid.  ``window`` is ``(t_a, t_b)`` in seconds from the
    first sample."""

    y_exp: np.ndarray
    dt: float
    simulate: Callable[[np.ndarray], np.ndarray]
    lower: np.ndarray
    upper: np.ndarray
    window: tuple[float, float] | None = None
    names: Sequence[str] = PARAM_NAMES

    def __post_init__(self) -> None:
        self.y_exp = np.asarray(self.y_exp, dtype=float)
        self.lower = np.asarray(self.lower, dtype=float)
        self.upper = np.asarray(self.upper, dtype=float)
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise ValueError("bounds must be 1-D arrays of equal length")
        if not (np.all(np.isfinite(self.lower)) and np.all(np.isfinite(self.upper))):
            raise ValueError("bounds must be finite")
        if np.any(self.lower >= self.upper):
            raise ValueError("each lower bound must be below its upper bound")
        n = self.y_exp.size
        t_end = (n - 1) * self.dt
        t_a, t_b = self.window if self.window is not None else (0.0, t_end)
        if not (0.0 <= t_a < t_b <= t_end + 1e-9):
            raise ValueError(f"window {self.window} lies outside the series [0, {t_end}]")
        self.window = (t_a, t_b)
        ia = int(math.ceil(t_a / self.dt - 1e-9))
        ib = int(math.floor(t_b / self.dt + 1e-9)) + 1
        self._slice = slice(ia, ib)

    def objective(self, theta) -> float:
        """RMSD over the window; failed or non-finite simulations score +inf."""
        theta = np.asarray(theta, dtype=float)
        try:
            y = np.asarray(self.simulate(theta), dtype=float)
        except (ValueError, ArithmeticError):
            return math.inf
        if y.shape != self.y_exp.shape or not np.all(np.isfinite(y[self._slice])):
            return math.inf
        return rmsd(self.y_exp[self._slice], y[self._slice])

    @property
    def signal_rms(self) -> float:
        return float(np.sqrt(np.mean(self.y_exp[self._slice] ** 2)))


@dataclass
class FitResult:
    theta: np.ndarray
    rmsd: float
    evaluations: int
    history: list[float] = field(default_factory=list)

    def as_dict(self, names: Sequence[str] = PARAM_NAMES) -> dict:
        return {"theta": {n: float(v) for n, v in zip(names, self.theta)},
                "rmsd": self.rmsd, "evaluations": self.evaluations}


def fit_parameters(problem: FitProblem, theta0, restarts: int = 3,
                   simplex_steps: Sequence[float] = (0.2, 0.05, 0.01, 0.002),
                   maxfev: int = 3000, xatol: float = 1e-10) -> FitResult:
    """Nelder-Mead with bound projection and a fixed restart schedule.

    The search runs in coordinates scaled by ``theta0``.  Trial points are
    clipped onto the bounds before evaluation.  Each restart begins from the
    incumbent with a fresh simplex whose relative edge is taken from
    ``simplex_steps``.
    """
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != problem.lower.shape:
        raise ValueError("theta0 has the wrong length")
    if np.any(theta0 < problem.lower) or np.any(theta0 > problem.upper):
        raise ValueError("theta0 lies outside the bounds")
    if np.any(theta0 == 0):
        raise ValueError("theta0 entries must be non-zero (used as scale)")
    scale = np.abs(theta0)
    lo, hi = problem.lower / scale, problem.upper / scale
    count = 0

    def to_theta(x):
        return np.clip(x, lo, hi) * scale

    def f(x):
        nonlocal count
        count += 1
        return problem.objective(to_theta(x))

    x_best = theta0 / scale
    f_best = f(x_best)
    history = [f_best]
    fatol = 1e-13 * max(problem.signal_rms, 1e-300)
    dim = x_best.size
    for k in range(restarts + 1):
        if f_best == 0.0:
            break
        step = simplex_steps[min(k, len(simplex_steps) - 1)]
        simplex = np.vstack([x_best] + [x_best + step * np.eye(dim)[i] * np.where(
            x_best[i] + step <= hi[i], 1.0, -1.0) for i in range(dim)])
        res = minimize(f, x_best, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "maxfev": maxfev,
                                "xatol": xatol, "fatol": fatol, "adaptive": True})
        x_cand = np.clip(res.x, lo, hi)
        f_cand = f(x_cand)
        if f_cand <= f_best:
            x_best, f_best = x_cand, f_cand
        history.append(f_best)
    return FitResult(theta=to_theta(x_best), rmsd=float(f_best), evaluations=count,
                     history=history)


# ---------------------------------------------------------------------------
# controller identification experiment

def identification_profile(dt: float = 0.01, duration: float = 6.0,
                           f0: float = 60.0, f_lv_nom: float = 50.0) -> dict[str, np.ndarray]:
    """Reference stimulus for identifying the controller gains.

    The upstream frequency ramps 0.5 Hz down at 0.25 Hz/s from t = 0.5 s,
    which opens the 200 mHz gate.  It holds, then returns to nominal at
    0.5 Hz/s from t = 4.5 s.  While the gate is open (1.5 s to 5 s) the LV
    set point toggles between +0.2 Hz and -0.2 Hz every 0.5 s.  The set-point
    channel is needed because the upstream channel alone leaves a common
    scaling of all gains unobservable.  Repeated toggling separates the small
    VSM damping from the much larger proportional gain.
    """
    t = np.arange(int(round(duration / dt)) + 1) * dt
    down = np.clip((t - 0.5) / 2.0, 0.0, 1.0)
    up = np.clip((t - 4.5) / 1.0, 0.0, 1.0)
    f_mv = 1.0 - 0.5 / f0 * (down - up)
    active = (t >= 1.5) & (t < 5.0)
    sign = np.where(np.floor((t - 1.5) / 0.5) % 2 == 0, 1.0, -1.0)
    f_lv_ref = np.where(active, 1.0 + 0.2 / f_lv_nom * sign, 1.0)
    return {"time": t, "f_mv": f_mv, "f_lv_ref": f_lv_ref}


def theta_of(params: AsgParams) -> np.ndarray:
    return np.array([getattr(params, n) for n in PARAM_NAMES], dtype=float)


def asg_fit_problem(time, f_mv, f_lv_ref, p_ref, base: AsgParams,
                    lower=None, upper=None, window=None, alpha: float = 1.0) -> FitProblem:
    """Fit problem for the controller gains on the power response ``p_ref``
    (MW, same grid as the stimulus).  Default bounds span 0.1x to 5x of the
    gains in ``base``."""
    time = np.asarray(time, dtype=float)
    if time.size < 2:
        raise ValueError("need at least two samples")
    dt = float(time[1] - time[0])
    ref = theta_of(base)
    lower = ref * 0.1 if lower is None else np.asarray(lower, dtype=float)
    upper = ref * 5.0 if upper is None else np.asarray(upper, dtype=float)
    f_mv = np.asarray(f_mv, dtype=float)
    f_lv_ref = np.asarray(f_lv_ref, dtype=float)

    def sim(theta):
        params = base.with_updates(**dict(zip(PARAM_NAMES, map(float, theta))))
        return simulate_asg(params, f_mv, f_lv_ref, dt, alpha)["p_asg"]

    return FitProblem(y_exp=np.asarray(p_ref, dtype=float), dt=dt, simulate=sim,
                      lower=lower, upper=upper, window=window)
