"""Discounted cash-flow valuation: schedules, NPV, IRR and break-even.

Timing convention
-----------------
The investment is paid at ``t = 0``.  Net revenue accrues in
``periods_per_year`` equal instalments at the end of each sub-period, so period
``k`` sits at ``t = k / periods_per_year`` years and is discounted by
``(1 + i) ** t``.  ``periods_per_year = 1`` gives plain end-of-year flows.
Revenue and O&M grow geometrically from year to year and are flat within a
year.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import ConfigError, NumericalError

IRR_LOWER = -0.99
IRR_UPPER = 10.0


class NoIrrError(NumericalError):
    """Raised when a schedule has no internal rate of return in the search range."""


@dataclass(frozen=True)
class FinanceAssumptions:
    """Per-project assumptions.  Money values are per MW (or MVA) of rating.

    ``cost_factor`` scales the up-front capital outlay.  ``om_rate`` is charged
    on that scaled outlay unless ``om_scales_with_cost`` is False, in which
    case it stays on the base ``inv_cost``.
    """

    revenue0: float
    growth: float = 0.06
    om_rate: float = 0.02
    inv_cost: float = 137_500.0
    horizon: int = 15
    discount: float = 0.06
    rating: float = 1.0
    cost_factor: float = 1.0
    periods_per_year: int = 12
    om_scales_with_cost: bool = True

    def __post_init__(self) -> None:
        for name in ("revenue0", "growth", "om_rate", "inv_cost", "discount", "rating",
                     "cost_factor"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if int(self.horizon) != self.horizon or self.horizon < 1:
            raise ConfigError("horizon must be an integer >= 1")
        if int(self.periods_per_year) != self.periods_per_year or self.periods_per_year < 1:
            raise ConfigError("periods_per_year must be an integer >= 1")
        if self.growth <= -1 or self.discount <= -1:
            raise ConfigError("growth and discount rates must exceed -1")
        if self.inv_cost < 0 or self.om_rate < 0 or self.rating < 0:
            raise ConfigError("inv_cost, om_rate and rating must be non-negative")
        if self.cost_factor <= 0:
            raise ConfigError("cost_factor must be positive")

    def with_updates(self, **changes) -> "FinanceAssumptions":
        return replace(self, **changes)


@dataclass(frozen=True)
class CashFlowSchedule:
    """Cash flows per sub-period; ``values[0]`` is the investment at t = 0."""

    values: np.ndarray
    periods_per_year: int = 1
    revenue: np.ndarray | None = None  # per year, years 1..T
    om: np.ndarray | None = None

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a schedule needs at least two entries")
        if not np.all(np.isfinite(v)):
            raise ValueError("schedule contains non-finite values")
        if (v.size - 1) % self.periods_per_year:
            raise ValueError("schedule length is not a whole number of years")
        object.__setattr__(self, "values", v)

    @property
    def years(self) -> int:
        return (self.values.size - 1) // self.periods_per_year

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.values.size) / self.periods_per_year

    def annual(self) -> np.ndarray:
        """Yearly totals ``[cf0, year 1, ..., year T]`` (length T + 1)."""
        body = self.values[1:].reshape(self.years, self.periods_per_year).sum(axis=1)
        return np.concatenate([self.values[:1], body])


def build_schedule(a: FinanceAssumptions) -> CashFlowSchedule:
    """Schedule for ``a``: ``-IC`` at t = 0, then ``(revenue - O&M)`` per year
    split evenly over the sub-periods."""
    years = np.arange(a.horizon)
    growth = (1.0 + a.growth) ** years
    revenue = a.revenue0 * a.rating * growth
    ic = a.inv_cost * a.cost_factor * a.rating
    om = a.om_rate * (ic if a.om_scales_with_cost else a.inv_cost * a.rating) * growth
    per = a.periods_per_year
    body = np.repeat((revenue - om) / per, per)
    return CashFlowSchedule(np.concatenate([[-ic], body]), per, revenue, om)


def _as_schedule(cf) -> CashFlowSchedule:
    return cf if isinstance(cf, CashFlowSchedule) else CashFlowSchedule(np.asarray(cf, float))


def npv(cf, rate: float) -> float:
    """Net present value of a schedule (or a plain yearly sequence) at ``rate``."""
    if not rate > -1:
        raise ValueError("rate must exceed -1")
    s = _as_schedule(cf)
    return float(np.sum(s.values * (1.0 + rate) ** (-s.times)))


def irr(cf, tol: float = 1e-12) -> float:
    """Smallest rate in (-0.99, 10] at which the NPV vanishes.

    The range is scanned on a grid that is fine near zero.  The first sign
    change is then refined with Brent's method.
    """
    s = _as_schedule(cf)
    v = s.values
    if not (np.any(v > 0) and np.any(v < 0)):
        raise NoIrrError("cash flows have no sign change; IRR is undefined")
    grid = np.unique(np.concatenate([np.linspace(IRR_LOWER, 0.0, 100, endpoint=False),
                                     np.geomspace(1e-4, IRR_UPPER, 400), [0.0]]))
    values = (1.0 + grid)[:, None] ** (-s.times)[None, :] @ v
    if np.any(values == 0.0):
        return float(grid[np.flatnonzero(values == 0.0)[0]])
    flips = np.flatnonzero(np.sign(values[:-1]) != np.sign(values[1:]))
    if flips.size == 0:
        raise NoIrrError(f"NPV keeps one sign on ({IRR_LOWER}, {IRR_UPPER}]")
    k = flips[0]
    root = brentq(lambda r: npv(s, r), grid[k], grid[k + 1], xtol=tol, rtol=4 * np.finfo(float).eps,
                  maxiter=200)
    return float(root)


def cumulative_cashflow(cf) -> np.ndarray:
    """Running undiscounted sum of the yearly totals."""
    s = _as_schedule(cf)
    return np.cumsum(s.annual())


def break_even_year(cf) -> int | None:
    """First year whose cumulative undiscounted cash flow is non-negative.

    Within-year timing follows the schedule's sub-periods.  Returns ``None``
    when the horizon ends before break-even.
    """
    s = _as_schedule(cf)
    cum = np.cumsum(s.values)
    hits = np.flatnonzero(cum >= 0)
    if hits.size == 0:
        return None
    return int(math.ceil(hits[0] / s.periods_per_year))


def irr_vs_capital_cost(a: FinanceAssumptions, factors: Sequence[float]) -> list[tuple[float, float]]:
    """IRR per capital-cost factor, as ``(factor, irr)`` pairs."""
    if len(factors) == 0:
        raise ValueError("no cost factors given")
    out = []
    for f in factors:
        if not f > 0:
            raise ValueError(f"cost factors must be positive, got {f}")
        out.append((float(f), irr(build_schedule(replace(a, cost_factor=float(f))))))
    return out
