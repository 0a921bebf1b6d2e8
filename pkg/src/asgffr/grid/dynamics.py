"""Fixed-step RMS simulation of the multi-machine network with an ASG injection.

Model
-----
* Classical machines: constant ``E'`` behind ``xd'``,
  ``2H dw/dt = Pm - Pe - D w`` and ``d(delta)/dt = 2 pi f0 w`` (w = speed
  deviation in pu).
* First-order governor/turbine: ``Tt dPm/dt = Pref - (mva/s_base)/Rg * w - Pm``.
* Loads are constant admittances derived from the initial bus voltages.
* The ASG is a constant-power current source at its bus with unity power
  factor, updated once per step from a filtered local frequency estimate.

The algebraic network is solved exactly at each RK4 stage through the
pre-inverted augmented admittance matrix; it is re-inverted once when the
load step is applied.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from ..control import AsgParams, ControllerLoop
from ..errors import ConfigError
from .network import GridModel
from .powerflow import OperatingPoint, solve_power_flow


@dataclass(frozen=True)
class DisturbanceSpec:
    bus: int = 6
    delta_p: float = 4.5        # MW, positive = additional load
    t_apply: float = 1.0        # s
    kind: str = "load_step"
    delta_q: float = 0.0        # MVAr

    def __post_init__(self) -> None:
        if self.kind != "load_step":
            raise ConfigError(f"unsupported disturbance kind {self.kind!r}")
        if not (math.isfinite(self.delta_p) and math.isfinite(self.t_apply)):
            raise ConfigError("disturbance values must be finite")


@dataclass(frozen=True)
class AsgAttachment:
    """Controller plus its placement in the network."""

    params: AsgParams
    bus: int = 5
    alpha: float = 1.0
    filter_tc: float = 0.05
    substeps: int = 10  # controller steps per network step

    def __post_init__(self) -> None:
        if self.substeps < 1 or self.filter_tc < 0 or not 0.0 <= self.alpha <= 1.0:
            raise ConfigError("invalid ASG attachment settings")


@dataclass
class SimResult:
    time: np.ndarray
    bus_ids: list[int]
    bus_angle: np.ndarray        # (n_bus, n) rad, synchronous reference frame
    bus_freq: np.ndarray         # (n_bus, n) Hz
    p_asg: np.ndarray            # (n,) MW injected by the ASG
    gen_angle: np.ndarray        # (n_gen, n) rad
    gen_speed: np.ndarray        # (n_gen, n) pu
    t_apply: float
    stable: bool = True
    message: str = ""
    extra: dict = field(default_factory=dict)

    @property
    def dt(self) -> float:
        return float(self.time[1] - self.time[0])

    def freq_at(self, bus_id: int) -> np.ndarray:
        return self.bus_freq[self.bus_ids.index(bus_id)]


def bus_frequency_estimate(angle, dt: float, filter_tc: float = 0.05,
                           f0: float = 60.0) -> np.ndarray:
    """Bus frequency from a phase-angle series.

    Backward difference ``f0 + (theta_k - theta_{k-1}) / (2 pi dt)`` passed
    through a first-order low pass (exact discretization, state starting at
    the first raw estimate).  Accepts 1-D or (n_series, n) arrays.
    """
    theta = np.unwrap(np.asarray(angle, dtype=float), axis=-1)
    if theta.shape[-1] < 3:
        raise ValueError("need at least 3 samples to estimate frequency")
    if dt <= 0 or filter_tc < 0:
        raise ValueError("dt must be positive and filter_tc non-negative")
    d = np.diff(theta, axis=-1) / (2.0 * np.pi * dt)
    raw = np.concatenate([d[..., :1], d], axis=-1)
    if filter_tc == 0:
        return f0 + raw
    a = 1.0 - math.exp(-dt / filter_tc)
    zi = (1.0 - a) * raw[..., :1]
    y, _ = lfilter([a], [1.0, -(1.0 - a)], raw, axis=-1, zi=zi)
    return f0 + y


class _Network:
    """Pre-factored algebraic network for one load configuration."""

    def __init__(self, model: GridModel, op: OperatingPoint, extra_load: dict[int, complex],
                 asg_idx: int | None):
        y = model.ybus.copy()
        vm2 = np.abs(op.v) ** 2
        for ld in model.loads:
            k = model.index(ld.bus)
            y[k, k] += complex(ld.p_mw, -ld.q_mvar) / model.s_base / vm2[k]
        for bus, s in extra_load.items():
            k = model.index(bus)
            y[k, k] += np.conj(s) / model.s_base / vm2[k]
        self.gen_idx = np.array([model.index(m.bus) for m in model.machines])
        self.yg = 1.0 / (1j * np.array([m.xd_prime for m in model.machines]))
        y[self.gen_idx, self.gen_idx] += self.yg
        z = np.linalg.inv(y)
        self.z_full = z[:, self.gen_idx] * self.yg
        self.z_gen = self.z_full[self.gen_idx]           # gen-bus V from E'
        self.asg_idx = asg_idx
        if asg_idx is not None:
            self.z_asg_col = z[:, asg_idx]
            self.z_asg_gen = z[self.gen_idx, asg_idx]
            self.z_asg_self = z[asg_idx, asg_idx]
            self.z_row_asg = self.z_full[asg_idx]

    def asg_current(self, e: np.ndarray, p_pu: float) -> complex:
        """Current of a unity-power-factor injection ``p_pu`` (fixed point)."""
        if self.asg_idx is None or p_pu == 0.0:
            return 0j
        v0 = self.z_row_asg @ e
        cur = p_pu / np.conj(v0)
        for _ in range(30):
            nxt = p_pu / np.conj(v0 + self.z_asg_self * cur)
            if abs(nxt - cur) <= 1e-14 * abs(nxt):
                return nxt
            cur = nxt
        return cur

    def gen_voltage(self, e: np.ndarray, i_asg: complex) -> np.ndarray:
        v = self.z_gen @ e
        if i_asg != 0:
            v = v + self.z_asg_gen * i_asg
        return v

    def all_voltage(self, e: np.ndarray, i_asg: complex) -> np.ndarray:
        v = self.z_full @ e
        if i_asg != 0:
            v = v + self.z_asg_col * i_asg
        return v


def run(model: GridModel, disturbance: DisturbanceSpec | None = None,
        asg: AsgAttachment | None = None, dt: float = 0.005, horizon: float = 60.0,
        op: OperatingPoint | None = None) -> SimResult:
    """Simulate ``horizon`` seconds with step ``dt``.

    Loss of synchronism (rotor-angle spread above pi) ends the run early; the
    remaining samples are NaN and ``stable`` is False.
    """
    if not (0 < dt <= 0.010):
        raise ConfigError("dt must lie in (0, 10 ms]")
    n = int(round(horizon / dt)) + 1
    if n < 3:
        raise ConfigError("horizon too short")
    if disturbance is not None and not (0.0 <= disturbance.t_apply <= horizon):
        raise ConfigError("disturbance time outside the simulation horizon")
    op = op or solve_power_flow(model)
    sb, f0 = model.s_base, model.f0
    ws = 2.0 * math.pi * f0
    asg_idx = model.index(asg.bus) if asg is not None else None
    if asg is not None and asg.params.Ta / 10.0 < dt / asg.substeps:
        raise ConfigError("controller step exceeds the ASG VSM stability guard")

    net_pre = _Network(model, op, {}, asg_idx)
    if disturbance is not None:
        model.index(disturbance.bus)
        net_post = _Network(model, op, {disturbance.bus: complex(disturbance.delta_p,
                                                                 disturbance.delta_q)}, asg_idx)
        k_apply = int(round(disturbance.t_apply / dt))
    else:
        net_post, k_apply = net_pre, n

    mach = model.machines
    two_h = np.array([2.0 * m.H for m in mach])
    damp = np.array([m.D for m in mach])
    tt = np.array([m.Tt for m in mach])
    kgov = np.array([m.mva / sb / m.Rg for m in mach])
    e_mag = op.e_mag
    p_ref = op.p_gen.copy()

    def rhs(x, net, i_asg):
        delta, w, pm = x
        e = e_mag * np.exp(1j * delta)
        vg = net.gen_voltage(e, i_asg)
        pe = (e * np.conj((e - vg) * net.yg)).real
        return np.array([ws * w, (pm - pe - damp * w) / two_h, (p_ref - kgov * w - pm) / tt])

    x = np.array([op.delta.copy(), np.zeros(len(mach)), p_ref.copy()])
    n_bus = len(model.buses)
    time = np.arange(n) * dt
    bus_angle = np.full((n_bus, n), np.nan)
    gen_angle = np.full((len(mach), n), np.nan)
    gen_speed = np.full((len(mach), n), np.nan)
    p_series = np.zeros(n)

    if asg is not None:
        loop = ControllerLoop(asg.params, asg.alpha)
        a_filt = 1.0 - math.exp(-dt / asg.filter_tc) if asg.filter_tc > 0 else 1.0
        h_ctrl = dt / asg.substeps
        f_meas = f0
        theta_prev = None
    p_hold = 0.0
    stable, message = True, ""

    for k in range(n):
        net = net_post if k >= k_apply else net_pre
        e = e_mag * np.exp(1j * x[0])
        i_asg = net.asg_current(e, p_hold / sb)
        v = net.all_voltage(e, i_asg)
        bus_angle[:, k] = np.angle(v)
        gen_angle[:, k] = x[0]
        gen_speed[:, k] = 1.0 + x[1]

        if asg is not None:
            theta = bus_angle[asg_idx, k]
            if theta_prev is not None:
                dth = (theta - theta_prev + math.pi) % (2.0 * math.pi) - math.pi
                f_raw = f0 + dth / (2.0 * math.pi * dt)
                f_meas += a_filt * (f_raw - f_meas)
            theta_prev = theta
            f_mv = f_meas / f0
            for _ in range(asg.substeps):
                p_hold = loop.step(f_mv, 1.0, h_ctrl)
        p_series[k] = p_hold

        if k == n - 1:
            break
        spread = x[0].max() - x[0].min()
        if not np.all(np.isfinite(x)) or spread > math.pi:
            stable = False
            message = f"loss of synchronism at t={time[k]:.3f} s (angle spread {spread:.2f} rad)"
            bus_angle[:, k:] = np.nan
            gen_angle[:, k:] = np.nan
            gen_speed[:, k:] = np.nan
            p_series[k:] = np.nan
            break

        # RK4 with the ASG power held over the step
        def stage(xs):
            es = e_mag * np.exp(1j * xs[0])
            return rhs(xs, net, net.asg_current(es, p_hold / sb))

        k1 = stage(x)
        k2 = stage(x + 0.5 * dt * k1)
        k3 = stage(x + 0.5 * dt * k2)
        k4 = stage(x + dt * k3)
        x = x + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    bus_freq = np.full_like(bus_angle, np.nan)
    good = np.all(np.isfinite(bus_angle), axis=0)
    m_good = int(good.sum())
    if m_good >= 3:
        filter_tc = asg.filter_tc if asg is not None else 0.05
        bus_freq[:, :m_good] = bus_frequency_estimate(bus_angle[:, :m_good], dt, filter_tc, f0)
    return SimResult(time=time, bus_ids=model.bus_ids, bus_angle=bus_angle, bus_freq=bus_freq,
                     p_asg=p_series, gen_angle=gen_angle, gen_speed=gen_speed,
                     t_apply=disturbance.t_apply if disturbance else float("nan"),
                     stable=stable, message=message)
