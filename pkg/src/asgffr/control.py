"""Reduced-order control model of the asynchronous grid connection (ASG).

Signal chain per step:

    governor PI on the LV frequency error
      -> feed-forward of the upstream (MV) deviation through 1/R
      -> symmetric power limit
      -> first-order virtual-synchronous-machine (VSM) swing block giving w*
      -> LV droop response of the downstream units, gated by a deadband

Conventions
-----------
* Frequencies are per unit. The upstream side uses ``f0`` (60 Hz) as base and
  the LV side uses ``f_lv_nom`` (50 Hz by default) as base.
* Controller powers (``p_gov``, ``p_ff``, ``p_mea``) are per unit of the
  device power base ``Prated``; ``p_asg`` is in MW.
* ``p_asg > 0`` means power injected into the upstream bus.  A drop of the LV
  frequency makes the droop-obeying LV units raise generation / shed load, so
  the surplus is exported: ``p_asg = -Kpf * alpha * (w* - 1) * Prated``.
* When the measured electric power is not supplied (``p_mea=None``) the loop
  is closed internally: the power drawn from the VSM equals ``-p_asg`` in pu.

Accuracy
--------
The VSM block is advanced with RK4 and is fourth order in ``dt`` on its own.
The closed loop feeds the droop power and LV frequency back with a one-step
delay, so closed-loop trajectories converge at first order in ``dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError

#: LV grid-code operating band as deviations from the LV nominal frequency (Hz).
LV_BAND_HZ = (-2.5, 1.5)

GATE_SIGNALS = ("lv", "mv")


@dataclass(frozen=True)
class AsgParams:
    """Controller gains and limits; defaults are the identified reference gains.

    ``deadband_signal`` selects what the deadband is applied to: ``"lv"`` gates
    on the LV set-point deviation (regulation-market mode), ``"mv"`` gates on
    the measured upstream deviation (grid-support mode).

    ``gate_hysteresis`` (Hz) latches the deadband gate: once open it closes
    only when the deviation falls below ``deadband - gate_hysteresis``.  Zero
    gives the plain gate.

    ``Prated`` is the MW value of one per unit of controller output.  Zero is
    allowed and yields an idle device.
    """

    R: float = 0.02
    Kpgov: float = 421.0
    Kigov: float = 1287.0
    Ta: float = 3.4
    Dp: float = 6.6
    Kpf: float = 0.4
    Plim: float = 1.0
    deadband: float = 0.200
    f0: float = 60.0
    f_lv_nom: float = 50.0
    Prated: float = 1.0
    deadband_signal: str = "lv"
    gate_hysteresis: float = 0.0

    def __post_init__(self) -> None:
        for name in ("R", "Kpgov", "Kigov", "Ta", "Dp", "Kpf", "Plim",
                     "deadband", "f0", "f_lv_nom", "Prated", "gate_hysteresis"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"AsgParams.{name} must be finite")
        if self.R == 0:
            raise ConfigError("droop coefficient R must be non-zero")
        if self.Ta <= 0:
            raise ConfigError("Ta must be positive")
        if self.Plim <= 0:
            raise ConfigError("Plim must be positive")
        if self.deadband < 0:
            raise ConfigError("deadband must be non-negative")
        if self.Kpgov < 0 or self.Kigov < 0:
            raise ConfigError("governor gains must be non-negative")
        if self.f0 <= 0 or self.f_lv_nom <= 0:
            raise ConfigError("nominal frequencies must be positive")
        if self.Prated < 0:
            raise ConfigError("Prated must be non-negative")
        if not 0.0 <= self.gate_hysteresis <= self.deadband:
            raise ConfigError("gate_hysteresis must lie in [0, deadband]")
        if self.deadband_signal not in GATE_SIGNALS:
            raise ConfigError(f"deadband_signal must be one of {GATE_SIGNALS}")

    @property
    def omega_band(self) -> tuple[float, float]:
        """Admissible range of w* in pu of the LV nominal frequency."""
        lo, hi = LV_BAND_HZ
        return 1.0 + lo / self.f_lv_nom, 1.0 + hi / self.f_lv_nom

    def with_updates(self, **changes) -> "AsgParams":
        return replace(self, **changes)


@dataclass(frozen=True)
class AsgState:
    """Integrator and swing states.  ``gov_error`` keeps the previous governor
    error for the trapezoidal integrator."""

    gov_integrator: float = 0.0
    gov_error: float = 0.0
    omega: float = 1.0
    f_lv: float = 1.0
    p_mea: float = 0.0
    gate_open: bool = False

    def __post_init__(self) -> None:
        for name in ("gov_integrator", "gov_error", "omega", "f_lv", "p_mea"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"AsgState.{name} is not finite")


@dataclass(frozen=True)
class AsgInputs:
    f_mv: float = 1.0
    f_lv_ref: float = 1.0
    p_mea: float | None = None
    alpha: float = 1.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        vals = [self.f_mv, self.f_lv_ref] + ([] if self.p_mea is None else [self.p_mea])
        if not all(math.isfinite(v) for v in vals):
            raise ValueError("AsgInputs contain non-finite values")


@dataclass(frozen=True)
class AsgOutput:
    p_asg: float  # MW, positive = injection upstream
    omega_star: float
    p_ff: float
    p_gov: float


def _check_finite(**values: float) -> None:
    for name, v in values.items():
        if not math.isfinite(v):
            raise ValueError(f"{name} is not finite ({v!r})")


def _check_dt(dt: float) -> None:
    if not (math.isfinite(dt) and dt > 0):
        raise ValueError(f"time step must be positive, got {dt!r}")


# ---------------------------------------------------------------------------
# scalar kernels shared by the dataclass API and the fast trajectory loop

def _governor(integ: float, e_prev: float, e: float, kp: float, ki: float,
              plim: float, dt: float) -> tuple[float, float]:
    candidate = integ + ki * dt * 0.5 * (e_prev + e)
    unclamped = kp * e + candidate
    # conditional integration: freeze while saturated and pushing further out
    if abs(unclamped) > plim and (candidate - integ) * unclamped > 0:
        candidate = integ
    p_gov = min(max(kp * e + candidate, -plim), plim)
    return p_gov, candidate


def _vsm_rk4(w: float, drive: float, dp: float, ta: float, dt: float) -> float:
    def deriv(x: float) -> float:
        return (drive - dp * (x - 1.0)) / ta

    k1 = deriv(w)
    k2 = deriv(w + 0.5 * dt * k1)
    k3 = deriv(w + 0.5 * dt * k2)
    k4 = deriv(w + dt * k3)
    return w + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def _gate(dev_hz: float, was_open: bool, deadband: float, hyst: float) -> bool:
    if was_open and hyst > 0.0:
        return abs(dev_hz) > deadband - hyst
    return abs(dev_hz) >= deadband


def _droop(w: float, alpha: float, kpf: float, is_open: bool) -> float:
    if not is_open:
        return 0.0
    return -kpf * alpha * (w - 1.0) + 0.0  # "+ 0.0" flushes -0.0


# ---------------------------------------------------------------------------
# public step functions

def governor_step(state: AsgState, f_ref: float, f_lv: float,
                  params: AsgParams, dt: float) -> tuple[float, AsgState]:
    """PI governor on the LV frequency error.

    The integral term uses the trapezoidal rule over the previous and current
    errors.  Returns ``(p_gov, new_state)``; ``|p_gov| <= Plim``.
    """
    _check_dt(dt)
    _check_finite(f_ref=f_ref, f_lv=f_lv)
    e = f_ref - f_lv
    p_gov, integ = _governor(state.gov_integrator, state.gov_error, e,
                             params.Kpgov, params.Kigov, params.Plim, dt)
    return p_gov, replace(state, gov_integrator=integ, gov_error=e)


def feed_forward(delta_f_mv: float, p_gov: float, params: AsgParams) -> float:
    """Unlimited feed-forward command ``delta_f_mv / R + p_gov``."""
    _check_finite(delta_f_mv=delta_f_mv, p_gov=p_gov)
    return delta_f_mv / params.R + p_gov


def apply_power_limit(p_ff_raw: float, params: AsgParams) -> float:
    return min(max(p_ff_raw, -params.Plim), params.Plim)


def vsm_step(state: AsgState, p_ff: float, p_mea: float, params: AsgParams,
             dt: float) -> float:
    """Advance ``Ta dw/dt = p_ff - p_mea - Dp (w - 1)`` by one RK4 step.

    Inputs are held over the step.  The result is clamped to the LV band.
    """
    _check_dt(dt)
    if dt > params.Ta / 10.0:
        raise ValueError(f"dt={dt} exceeds the VSM stability guard Ta/10={params.Ta / 10}")
    _check_finite(p_ff=p_ff, p_mea=p_mea)
    w = _vsm_rk4(state.omega, p_ff - p_mea, params.Dp, params.Ta, dt)
    lo, hi = params.omega_band
    return min(max(w, lo), hi)


def lv_droop_response(omega_star: float, alpha: float, params: AsgParams,
                      gate_deviation_hz: float | None = None, was_open: bool = False) -> float:
    """Droop power of the LV units in pu of ``Prated``.

    The deadband is checked against ``gate_deviation_hz`` when given (used for
    MV gating) and otherwise against the LV deviation of ``omega_star``.
    Outside the deadband the full deviation is used.  ``was_open`` is the
    previous gate state, which matters only with ``gate_hysteresis > 0``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
    if gate_deviation_hz is None:
        gate_deviation_hz = (omega_star - 1.0) * params.f_lv_nom
    is_open = _gate(gate_deviation_hz, was_open, params.deadband, params.gate_hysteresis)
    return _droop(omega_star, alpha, params.Kpf, is_open)


def asg_step(state: AsgState, inputs: AsgInputs, params: AsgParams,
             dt: float) -> tuple[AsgOutput, AsgState]:
    """One controller step: governor, feed-forward, limit, VSM, LV droop."""
    _check_dt(dt)
    p_gov, st = governor_step(state, inputs.f_lv_ref, state.f_lv, params, dt)
    delta_mv = inputs.f_mv - 1.0
    p_ff = apply_power_limit(feed_forward(delta_mv, p_gov, params), params)
    p_mea = state.p_mea if inputs.p_mea is None else inputs.p_mea
    w = vsm_step(st, p_ff, p_mea, params, dt)
    if params.deadband_signal == "mv":
        gate_dev = delta_mv * params.f0
    else:
        gate_dev = (w - 1.0) * params.f_lv_nom
    is_open = _gate(gate_dev, state.gate_open, params.deadband, params.gate_hysteresis)
    p_pu = lv_droop_response(w, inputs.alpha, params, gate_dev, state.gate_open)
    next_mea = -p_pu + 0.0 if inputs.p_mea is None else inputs.p_mea
    new_state = replace(st, omega=w, f_lv=w, p_mea=next_mea, gate_open=is_open)
    out = AsgOutput(p_asg=p_pu * params.Prated + 0.0, omega_star=w, p_ff=p_ff, p_gov=p_gov)
    return out, new_state


class ControllerLoop:
    """Closed-loop controller advanced on plain floats.

    Numerically identical to iterating :func:`asg_step` with ``p_mea=None``,
    without per-step object allocation (used inside the grid simulator and
    parameter fits).
    """

    def __init__(self, params: AsgParams, alpha: float = 1.0, state: AsgState | None = None):
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {alpha}")
        st = state or AsgState()
        self.params = params
        self.alpha = alpha
        self.integ, self.e_prev = st.gov_integrator, st.gov_error
        self.omega, self.f_lv, self.p_mea = st.omega, st.f_lv, st.p_mea
        self.gate_open = st.gate_open
        self.p_ff = self.p_gov = 0.0
        self._lo, self._hi = params.omega_band

    def step(self, f_mv: float, f_lv_ref: float, dt: float) -> float:
        """Advance one step with inputs held; returns ``p_asg`` in MW."""
        prm = self.params
        e = f_lv_ref - self.f_lv
        self.p_gov, self.integ = _governor(self.integ, self.e_prev, e, prm.Kpgov,
                                           prm.Kigov, prm.Plim, dt)
        self.e_prev = e
        d_mv = f_mv - 1.0
        self.p_ff = min(max(d_mv / prm.R + self.p_gov, -prm.Plim), prm.Plim)
        w = _vsm_rk4(self.omega, self.p_ff - self.p_mea, prm.Dp, prm.Ta, dt)
        w = min(max(w, self._lo), self._hi)
        self.omega = self.f_lv = w
        dev = d_mv * prm.f0 if prm.deadband_signal == "mv" else (w - 1.0) * prm.f_lv_nom
        self.gate_open = _gate(dev, self.gate_open, prm.deadband, prm.gate_hysteresis)
        p_pu = _droop(w, self.alpha, prm.Kpf, self.gate_open)
        self.p_mea = -p_pu + 0.0
        return p_pu * prm.Prated + 0.0

    @property
    def state(self) -> AsgState:
        return AsgState(self.integ, self.e_prev, self.omega, self.f_lv, self.p_mea,
                        self.gate_open)


def simulate_asg(params: AsgParams, f_mv, f_lv_ref, dt: float, alpha: float = 1.0,
                 state: AsgState | None = None) -> dict[str, np.ndarray]:
    """Run the closed-loop controller over stimulus arrays.

    ``f_mv`` and ``f_lv_ref`` are per-unit arrays of equal length; sample ``k``
    is the input held over step ``k``.  Returns arrays ``p_asg`` (MW),
    ``omega``, ``p_ff`` and ``p_gov`` with the post-step values.
    """
    _check_dt(dt)
    if dt > params.Ta / 10.0:
        raise ValueError(f"dt={dt} exceeds the VSM stability guard Ta/10={params.Ta / 10}")
    f_mv = np.asarray(f_mv, dtype=float)
    f_lv_ref = np.asarray(f_lv_ref, dtype=float)
    if f_mv.shape != f_lv_ref.shape or f_mv.ndim != 1:
        raise ValueError("stimulus arrays must be 1-D and of equal length")
    if not (np.all(np.isfinite(f_mv)) and np.all(np.isfinite(f_lv_ref))):
        raise ValueError("stimulus contains non-finite values")
    loop = ControllerLoop(params, alpha, state)
    n = f_mv.size
    out = {key: np.empty(n) for key in ("p_asg", "omega", "p_ff", "p_gov")}
    p_out, w_out, ff_out, gov_out = out["p_asg"], out["omega"], out["p_ff"], out["p_gov"]
    for k, (fm, fr) in enumerate(zip(f_mv.tolist(), f_lv_ref.tolist())):
        p_out[k] = loop.step(fm, fr, dt)
        w_out[k] = loop.omega
        ff_out[k] = loop.p_ff
        gov_out[k] = loop.p_gov
    return out


def compute_sensitivity(delta_p: float, p0: float, delta_f: float, f0: float) -> float:
    """Grid-code power-frequency sensitivity ``(dP/P0) / (df/f0)``."""
    if p0 <= 0 or f0 <= 0:
        raise ValueError("p0 and f0 must be positive")
    if delta_f == 0:
        raise ZeroDivisionError("sensitivity is undefined for a zero frequency change")
    return (delta_p / p0) / (delta_f / f0)


# ---------------------------------------------------------------------------
# sizing of the MW-per-pu power base

def grid_power_base(rating_mw: float, params: AsgParams, design_rocof_hz_s: float,
                    alpha: float = 1.0) -> float:
    """Power base for the grid-support study.

    With the governor integral active, the LV deviation follows the upstream
    rate of change: ``dw ~= (d f_mv/dt) / (R * Kigov)`` (pu/s in, pu out).  The
    base is chosen so that an upstream RoCoF of ``design_rocof_hz_s`` produces
    ``rating_mw`` of droop response.
    """
    if rating_mw < 0 or design_rocof_hz_s <= 0:
        raise ConfigError("rating must be >= 0 and design RoCoF > 0")
    gain = params.Kpf * alpha * design_rocof_hz_s / (params.f0 * params.R * params.Kigov)
    if gain <= 0:
        raise ConfigError("droop gain, alpha and Kigov must be positive to size the device")
    return rating_mw / gain


def market_power_base(rating_mw: float, params: AsgParams, f_shift_max_hz: float,
                      alpha: float = 1.0) -> float:
    """Power base such that a full set-point shift yields ``rating_mw``."""
    if rating_mw < 0 or f_shift_max_hz <= 0:
        raise ConfigError("rating must be >= 0 and f_shift_max > 0")
    gain = params.Kpf * alpha * f_shift_max_hz / params.f_lv_nom
    if gain <= 0:
        raise ConfigError("droop gain and alpha must be positive to size the device")
    return rating_mw / gain
