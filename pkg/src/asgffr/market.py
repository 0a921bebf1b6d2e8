"""Regulation-market backtest for an ASG following a fast regulation signal.

The normalized RegD signal is mapped to an LV frequency set point.  The
droop-obeying units behind the ASG answer the set-point shift outside a
deadband, subject to a ramp-rate limit and the power rating.  Each aligned
5-minute window is paid ``M * rho * (RCCP + beta * RPCP)``, where

* ``M`` is the mileage of the delivered power in MW,
* ``beta`` is the RegD-to-RegA signal-mileage ratio of the window.

Sign convention: raising the LV set point makes the LV units back off, which
lowers the ASG's upstream injection.  Regulation output is therefore reported
as ``-p_asg``, so positive output follows a positive RegD signal.
"""

from __future__ import annotations

import csv
import datetime as _dt
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.signal import lfilter

from .control import AsgParams, ControllerLoop, market_power_base
from .errors import ConfigError

SAMPLE_S = 2.0
WINDOW_S = 300.0
SAMPLES_PER_WINDOW = int(WINDOW_S / SAMPLE_S)
SYNTHETIC_START = int(_dt.datetime(2023, 9, 1, tzinfo=_dt.timezone.utc).timestamp())


class SignalGapError(ConfigError):
    """The regulation signal is not on a gap-free 2-second grid."""


# ---------------------------------------------------------------------------
# data types

@dataclass(frozen=True)
class RegSignalSeries:
    """Regulation signals on a uniform 2-second grid (UTC epoch seconds)."""

    timestamps: np.ndarray
    regd: np.ndarray
    rega: np.ndarray | None = None

    def __post_init__(self) -> None:
        t = np.asarray(self.timestamps, dtype=float)
        d = np.asarray(self.regd, dtype=float)
        if t.ndim != 1 or t.shape != d.shape or t.size == 0:
            raise ConfigError("timestamps and regd must be 1-D arrays of equal, non-zero length")
        if t.size > 1:
            steps = np.diff(t)
            bad = np.flatnonzero(np.abs(steps - SAMPLE_S) > 1e-6)
            if bad.size:
                k = int(bad[0])
                raise SignalGapError(f"sample spacing {steps[k]} s at t={t[k]} (expected {SAMPLE_S} s);"
                                     " gaps are not interpolated")
        a = None
        if self.rega is not None:
            a = np.asarray(self.rega, dtype=float)
            if a.shape != t.shape:
                raise ConfigError("rega must match regd in length")
        for name, arr in (("regd", d), ("rega", a)):
            if arr is not None and (not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > 1.0)):
                raise ConfigError(f"{name} values must be finite and within [-1, 1]")
        object.__setattr__(self, "timestamps", t)
        object.__setattr__(self, "regd", d)
        object.__setattr__(self, "rega", a)

    def __len__(self) -> int:
        return self.timestamps.size


@dataclass(frozen=True)
class ClearingPrices:
    """Clearing prices keyed by period start (epoch s).

    ``granularity`` is ``"window"`` (one row per 5-minute window),
    ``"month"`` (one row per calendar month, broadcast to its windows) or
    ``"constant"`` (a single row applied everywhere).
    """

    starts: np.ndarray
    rccp: np.ndarray  # $/MW
    rpcp: np.ndarray  # $/delta-MW
    granularity: str = "window"

    def __post_init__(self) -> None:
        s = np.asarray(self.starts, dtype=float)
        c = np.asarray(self.rccp, dtype=float)
        p = np.asarray(self.rpcp, dtype=float)
        if not (s.shape == c.shape == p.shape) or s.ndim != 1 or s.size == 0:
            raise ConfigError("price columns must be 1-D and of equal, non-zero length")
        if not (np.all(np.isfinite(c)) and np.all(np.isfinite(p))) or np.any(c < 0) or np.any(p < 0):
            raise ConfigError("clearing prices must be finite and non-negative")
        if self.granularity not in ("window", "month", "constant"):
            raise ConfigError(f"unknown price granularity {self.granularity!r}")
        if np.unique(s).size != s.size:
            raise ConfigError("duplicate price periods")
        object.__setattr__(self, "starts", s)
        object.__setattr__(self, "rccp", c)
        object.__setattr__(self, "rpcp", p)

    @classmethod
    def constant(cls, rccp: float, rpcp: float) -> "ClearingPrices":
        return cls(np.array([0.0]), np.array([rccp]), np.array([rpcp]), "constant")

    def lookup(self, window_starts) -> tuple[np.ndarray, np.ndarray]:
        ws = np.asarray(window_starts, dtype=float)
        if self.granularity == "constant":
            return np.full(ws.size, self.rccp[0]), np.full(ws.size, self.rpcp[0])
        keys = ws if self.granularity == "window" else np.array([_month_start(w) for w in ws])
        order = np.argsort(self.starts)
        pos = np.searchsorted(self.starts[order], keys)
        pos = np.minimum(pos, self.starts.size - 1)
        idx = order[pos]
        missing = self.starts[idx] != keys
        if np.any(missing):
            k = int(np.flatnonzero(missing)[0])
            raise ConfigError(f"no clearing price for the period starting at {_iso(keys[k])}")
        return self.rccp[idx], self.rpcp[idx]


@dataclass(frozen=True)
class RegulationConfig:
    """Market participation settings.

    ``deadband`` is the fraction of the set-point span inside which the units
    do not respond; 1.0 disables the response entirely.
    """

    rating: float
    ramp_limit: float           # MW/s
    deadband: float = 0.2
    rho: float = 0.76
    f_shift_max: float = 1.0    # Hz
    f0: float = 60.0

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rating) and self.rating >= 0):
            raise ConfigError("rating must be a finite, non-negative MW value")
        if not (math.isfinite(self.ramp_limit) and self.ramp_limit > 0):
            raise ConfigError("ramp_limit must be positive")
        if not 0.0 <= self.deadband <= 1.0:
            raise ConfigError("deadband fraction must lie in [0, 1]")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigError("rho must lie in [0, 1]")
        if not (self.f_shift_max > 0 and self.f0 > 0):
            raise ConfigError("f_shift_max and f0 must be positive")


@dataclass
class CreditStatement:
    """Per-window settlement plus monthly totals."""

    window_start: np.ndarray
    mileage_mw: np.ndarray
    beta: np.ndarray
    rccp: np.ndarray
    rpcp: np.ndarray
    credit: np.ndarray
    rating: float
    monthly: list[dict] = field(default_factory=list)

    @property
    def total(self) -> float:
        return float(math.fsum(self.credit))


@dataclass(frozen=True)
class MarketDataset:
    signal: RegSignalSeries
    prices: ClearingPrices


# ---------------------------------------------------------------------------
# formulas

def rescale_regd(regd, f_shift_max: float = 1.0, f0: float = 60.0):
    """Affine map of RegD in [-1, 1] onto ``1 +/- f_shift_max / f0`` pu.

    Out-of-range inputs are clamped with a warning.
    """
    x = np.asarray(regd, dtype=float)
    if np.any(np.abs(x) > 1.0):
        warnings.warn("RegD values outside [-1, 1] were clamped", RuntimeWarning, stacklevel=2)
        x = np.clip(x, -1.0, 1.0)
    out = 1.0 + x * (f_shift_max / f0)
    return float(out) if out.ndim == 0 else out


def mileage(series, axis: int = -1):
    """Sum of absolute sample-to-sample movement."""
    x = np.asarray(series, dtype=float)
    if x.shape[axis] < 2:
        raise ValueError("mileage needs at least two samples")
    return np.sum(np.abs(np.diff(x, axis=axis)), axis=axis)


def mileage_ratio(m_regd, m_rega):
    """RegD-to-RegA mileage ratio; a zero RegA mileage is an error."""
    m_rega = np.asarray(m_rega, dtype=float)
    if np.any(m_rega <= 0):
        raise ZeroDivisionError("mileage ratio is undefined for zero RegA mileage")
    out = np.asarray(m_regd, dtype=float) / m_rega
    return float(out) if out.ndim == 0 else out


def regulation_credit(m_regd, rho: float, rccp, beta, rpcp):
    """Window credit ``M * rho * (RCCP + beta * RPCP)`` in $."""
    if not 0.0 <= rho <= 1.0:
        raise ValueError("rho must lie in [0, 1]")
    arrays = [np.asarray(v, dtype=float) for v in (m_regd, rccp, beta, rpcp)]
    if any(np.any(v < 0) for v in arrays):
        raise ValueError("credit inputs must be non-negative")
    m, c, b, p = arrays
    out = m * (c + b * p) * rho  # score last: exact when the other factors are integral
    return float(out) if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# response simulation

def market_asg_params(config: RegulationConfig, asg: AsgParams) -> AsgParams:
    """Controller parameters for market operation.

    The LV side is referenced to ``config.f0``, the deadband is applied to the
    LV set-point deviation, and the power base is sized so that a full
    set-point shift asks for the full rating.
    """
    prm = asg.with_updates(f_lv_nom=config.f0, deadband_signal="lv", gate_hysteresis=0.0,
                           deadband=config.deadband * config.f_shift_max, Prated=0.0)
    base = market_power_base(config.rating, prm, config.f_shift_max) if config.rating > 0 else 0.0
    return prm.with_updates(Prated=base)


def _ramp_and_saturate(target: np.ndarray, ramp_step: float, rating: float) -> np.ndarray:
    out = np.empty_like(target)
    prev = 0.0
    for k, want in enumerate(target.tolist()):
        lo, hi = prev - ramp_step, prev + ramp_step
        val = lo if want < lo else hi if want > hi else want
        val = -rating if val < -rating else rating if val > rating else val
        out[k] = prev = val
    return out


def simulate_regulation(signal: RegSignalSeries, config: RegulationConfig, asg: AsgParams,
                        mode: str = "quasi_steady", substep: float = 0.005) -> np.ndarray:
    """Regulation output in MW on the 2-second grid.

    ``"quasi_steady"`` takes the LV frequency equal to the set point at the
    end of each 2-s hold; the controller settles in a fraction of a second.
    ``"dynamic"`` integrates the controller through each hold with step
    ``substep`` and samples it at the end; its LV-frequency gate acts inside
    the hold.  Both apply the signal deadband ``|regd| <= deadband``, the ramp
    clamp ``|dP| <= ramp_limit * 2 s`` and saturation at the rating.
    """
    prm = market_asg_params(config, asg)
    regd = np.atleast_1d(signal.regd)
    f_set = rescale_regd(regd, config.f_shift_max, config.f0)
    # the market rule is stated on the signal, so gate on |regd| itself
    gate = np.abs(regd) > config.deadband
    if mode == "quasi_steady":
        p_asg = np.where(gate, -prm.Kpf * (f_set - 1.0) * prm.Prated, 0.0)
    elif mode == "dynamic":
        n_sub = int(round(SAMPLE_S / substep))
        if n_sub < 1 or abs(n_sub * substep - SAMPLE_S) > 1e-9:
            raise ConfigError("substep must divide the 2-s sample period")
        loop = ControllerLoop(prm)
        p_asg = np.empty(f_set.size)
        for k, ref in enumerate(f_set.tolist()):
            for _ in range(n_sub):
                p = loop.step(1.0, ref, substep)
            p_asg[k] = p
        p_asg = np.where(gate, p_asg, 0.0)
    else:
        raise ConfigError(f"unknown regulation mode {mode!r}")
    return _ramp_and_saturate(-p_asg + 0.0, config.ramp_limit * SAMPLE_S, config.rating)


# ---------------------------------------------------------------------------
# settlement

def _month_start(epoch: float) -> float:
    d = _dt.datetime.fromtimestamp(epoch, tz=_dt.timezone.utc)
    return _dt.datetime(d.year, d.month, 1, tzinfo=_dt.timezone.utc).timestamp()


def _iso(epoch: float) -> str:
    return _dt.datetime.fromtimestamp(epoch, tz=_dt.timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def _month_key(epoch: float) -> str:
    return _dt.datetime.fromtimestamp(epoch, tz=_dt.timezone.utc).strftime("%Y-%m")


def window_index(timestamps: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start times and first-sample offsets of complete, clock-aligned windows.

    Partial windows at either end are dropped.
    """
    t = np.asarray(timestamps, dtype=float)
    first = np.flatnonzero(np.mod(t, WINDOW_S) == 0.0)
    first = first[first + SAMPLES_PER_WINDOW <= t.size]
    return t[first], first


def settle(signal: RegSignalSeries, response: np.ndarray, prices: ClearingPrices,
           config: RegulationConfig) -> CreditStatement:
    """Credit every complete window and aggregate per calendar month."""
    if signal.rega is None:
        raise ConfigError("RegA samples are required for the mileage ratio")
    starts, first = window_index(signal.timestamps)
    if starts.size == 0:
        raise ConfigError("no complete 5-minute window in the signal")
    rows = first[:, None] + np.arange(SAMPLES_PER_WINDOW)[None, :]
    m_resp = mileage(np.asarray(response, dtype=float)[rows], axis=1)
    beta = mileage_ratio(mileage(signal.regd[rows], axis=1), mileage(signal.rega[rows], axis=1))
    rccp, rpcp = prices.lookup(starts)
    credit = regulation_credit(m_resp, config.rho, rccp, beta, rpcp)
    stmt = CreditStatement(starts, m_resp, np.atleast_1d(beta), rccp, rpcp,
                           np.atleast_1d(credit), config.rating)
    stmt.monthly = _monthly(stmt)
    return stmt


def _monthly(stmt: CreditStatement) -> list[dict]:
    keys = [_month_key(s) for s in stmt.window_start]
    out = []
    for key in sorted(set(keys)):
        sel = [i for i, k in enumerate(keys) if k == key]
        total = math.fsum(stmt.credit[sel])
        out.append({"month": key, "windows": len(sel), "credit": total,
                    "credit_per_mw": total / stmt.rating if stmt.rating > 0 else 0.0})
    return out


def monthly_revenue(dataset: MarketDataset, config: RegulationConfig, asg: AsgParams,
                    mode: str = "quasi_steady") -> CreditStatement:
    """Simulate the response and settle it; see :attr:`CreditStatement.monthly`."""
    resp = simulate_regulation(dataset.signal, config, asg, mode)
    return settle(dataset.signal, resp, dataset.prices, config)


# ---------------------------------------------------------------------------
# synthetic signals

@dataclass(frozen=True)
class SyntheticSpec:
    """Shape of the synthetic signal.

    An AR(1) process with correlation time ``ace_tc``, smoothed by a
    first-order low pass (``smooth_tc``), stands in for the area control
    error.  RegD is its high-pass part ``ace - lowpass(ace, regd_tc)`` divided
    by ``regd_gain`` and clipped to [-1, 1].  RegA is ``tanh(lowpass(ace,
    rega_tc) / rega_gain)``; the soft limit keeps RegA moving, so every window
    has a defined mileage ratio.

    With the defaults RegD has a standard deviation near 0.45, lies outside a
    20 % deadband about two thirds of the time and moves about 2 per 5-minute
    window.  Its mileage is about four times that of RegA.
    """

    start_epoch: int = SYNTHETIC_START
    ace_tc: float = 300.0
    smooth_tc: float = 30.0
    regd_tc: float = 120.0
    rega_tc: float = 60.0
    regd_gain: float = 1.0
    rega_gain: float = 2.0


def generate_synthetic_regd(seed: int, duration: float,
                            shape: SyntheticSpec | None = None) -> RegSignalSeries:
    """Deterministic RegD/RegA pair of ``duration`` seconds (a multiple of 2)."""
    shape = shape or SyntheticSpec()
    n = duration / SAMPLE_S
    if duration <= 0 or abs(n - round(n)) > 1e-9:
        raise ConfigError("duration must be a positive multiple of 2 s")
    n = int(round(n))
    rng = np.random.default_rng(seed)
    a = math.exp(-SAMPLE_S / shape.ace_tc)
    warm = int(5 * max(shape.ace_tc, shape.regd_tc, shape.rega_tc) / SAMPLE_S)
    noise = rng.standard_normal(n + warm) * math.sqrt(1.0 - a * a)

    def lowpass(x, tc):
        b = 1.0 - math.exp(-SAMPLE_S / tc)
        return lfilter([b], [1.0, -(1.0 - b)], x)

    ace = lowpass(lfilter([1.0], [1.0, -a], noise), shape.smooth_tc)

    regd = np.clip((ace - lowpass(ace, shape.regd_tc))[warm:] / shape.regd_gain, -1.0, 1.0)
    rega = np.tanh(lowpass(ace, shape.rega_tc)[warm:] / shape.rega_gain)
    t = shape.start_epoch + SAMPLE_S * np.arange(n)
    return RegSignalSeries(t, regd, rega)


# ---------------------------------------------------------------------------
# CSV input

def _read_rows(path: Path) -> tuple[list[str], list[list[str]]]:
    if not path.is_file():
        raise ConfigError(f"file not found: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ConfigError(f"{path}: empty file") from None
        return header, [r for r in reader if r]


def _column(path, header, rows, name, required=True):
    if name not in header:
        if required:
            raise ConfigError(f"{path}: missing column {name!r}")
        return None
    k = header.index(name)
    try:
        return np.array([float(r[k]) for r in rows])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{path}: bad value in column {name!r}: {exc}") from exc


def read_regd_csv(path) -> RegSignalSeries:
    """Read ``epoch_s, regd[, rega]``."""
    path = Path(path)
    header, rows = _read_rows(path)
    t = _column(path, header, rows, "epoch_s")
    return RegSignalSeries(t, _column(path, header, rows, "regd"),
                           _column(path, header, rows, "rega", required=False))


def read_prices_csv(path) -> ClearingPrices:
    """Read ``window_start, rccp, rpcp``.

    Rows that all fall on calendar-month boundaries are treated as monthly
    prices; otherwise each row prices one 5-minute window.
    """
    path = Path(path)
    header, rows = _read_rows(path)
    s = _column(path, header, rows, "window_start")
    monthly = s.size > 0 and all(_month_start(v) == v for v in s) and (
        s.size == 1 or np.min(np.diff(np.sort(s))) >= 28 * 86400)
    return ClearingPrices(s, _column(path, header, rows, "rccp"),
                          _column(path, header, rows, "rpcp"), "month" if monthly else "window")


__all__ = [
    "ClearingPrices", "CreditStatement", "MarketDataset", "RegSignalSeries", "RegulationConfig",
    "SignalGapError", "SyntheticSpec", "generate_synthetic_regd", "market_asg_params", "mileage",
    "mileage_ratio", "monthly_revenue", "read_prices_csv", "read_regd_csv", "regulation_credit",
    "rescale_regd", "settle", "simulate_regulation", "window_index",
]
