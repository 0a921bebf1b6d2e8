"""Nadir and energy metrics of a simulated frequency event."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..errors import NumericalError
from .dynamics import SimResult


@dataclass(frozen=True)
class ResponseMetrics:
    t_nadir: float        # s, simulation clock
    f_nadir: float        # Hz
    delta_t_nadir: float  # s, versus the base case
    pct_change: float     # %, delta_t_nadir / base t_nadir
    delta_E: float        # kWh injected by the ASG

    def as_dict(self) -> dict:
        return asdict(self)


def energy_kwh(time, p_mw) -> float:
    """Trapezoidal integral of a MW series over ``time`` (s), in kWh."""
    return float(np.trapezoid(np.asarray(p_mw, float), np.asarray(time, float)) / 3.6)


def find_nadir(time, freq, t_from: float) -> tuple[float, float]:
    """Global minimum of ``freq`` at or after ``t_from``.

    A minimum on the last sample means the frequency was still falling at the
    end of the window, which is reported as an error.
    """
    time = np.asarray(time, float)
    freq = np.asarray(freq, float)
    sel = np.flatnonzero(time >= t_from)
    if sel.size < 3 or not np.all(np.isfinite(freq[sel])):
        raise NumericalError("post-disturbance series is too short or not finite")
    seg = freq[sel]
    k = int(np.argmin(seg))
    if k == seg.size - 1:
        raise NumericalError("frequency is still decreasing at the end of the horizon; no nadir")
    if k == 0 and seg[0] <= seg.min():
        if np.all(np.diff(seg) >= 0):
            raise NumericalError("frequency never falls after the disturbance; no nadir")
    return float(time[sel[k]]), float(seg[k])


def compute_metrics(result: SimResult, base: SimResult, bus: int = 6) -> ResponseMetrics:
    if result.time.shape != base.time.shape or not np.array_equal(result.time, base.time):
        raise ValueError("result and base must share the same time grid")
    t0 = result.t_apply if np.isfinite(result.t_apply) else float(result.time[0])
    t_n, f_n = find_nadir(result.time, result.freq_at(bus), t0)
    tb, _ = find_nadir(base.time, base.freq_at(bus), t0)
    dtn = t_n - tb
    return ResponseMetrics(t_nadir=t_n, f_nadir=f_n, delta_t_nadir=dtn,
                           pct_change=dtn / tb * 100.0,
                           delta_E=energy_kwh(result.time, result.p_asg))
