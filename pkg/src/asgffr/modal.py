"""Prony analysis of ringdown signals.

A uniformly sampled signal is modelled as ``sum_i A_i exp(sigma_i t) cos(omega_i t + phi_i)``.
Linear prediction runs over ``prediction_order`` lags (default ``N // 3``,
capped at 200).  The least-squares solution is truncated to the ``order``
dominant singular directions (Kumaresan-Tufts).  With ``prediction_order ==
order`` this is the classical Prony method.  The extended form keeps the
noiseless round trip exact and removes most of the noise bias of the
classical solution on densely sampled data.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import NumericalError

MAX_PREDICTION_ORDER = 200


@dataclass(frozen=True)
class ModalEstimate:
    """One damped-cosine term.  Phase is referenced to ``t = 0`` of the
    window's time axis.  ``degenerate`` marks terms with negligible energy or
    a root on the negative real axis (Nyquist)."""

    A: float
    sigma: float
    omega: float
    phi: float
    f_mode: float
    zeta: float
    energy: float = 0.0
    degenerate: bool = False

    @property
    def eigenvalue(self) -> complex:
        return complex(self.sigma, self.omega)

    def as_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class RingdownWindow:
    samples: np.ndarray
    dt: float
    t_start: float = 0.0
    offset: float = 0.0

    def __post_init__(self) -> None:
        x = np.asarray(self.samples, dtype=float)
        if x.ndim != 1:
            raise ValueError("window samples must be 1-D")
        if not np.all(np.isfinite(x)):
            raise ValueError("window contains non-finite samples")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        object.__setattr__(self, "samples", x)

    @property
    def t_end(self) -> float:
        return self.t_start + (self.samples.size - 1) * self.dt

    @property
    def time(self) -> np.ndarray:
        return self.t_start + self.dt * np.arange(self.samples.size)


def window_from_series(time, values, t_from: float, t_to: float,
                       offset: float | None = None, step: float | None = None) -> RingdownWindow:
    """Cut ``[t_from, t_to]`` from a uniform series, subtract ``offset``
    (default: the last sample of the full series) and optionally decimate to
    ``step`` seconds."""
    time = np.asarray(time, dtype=float)
    values = np.asarray(values, dtype=float)
    if time.size != values.size or time.size < 2:
        raise ValueError("time and values must have equal length >= 2")
    dt = float(time[1] - time[0])
    if not np.allclose(np.diff(time), dt, rtol=1e-6, atol=1e-9):
        raise ValueError("series is not uniformly sampled")
    if offset is None:
        offset = float(values[-1])
    stride = 1 if step is None else max(1, int(round(step / dt)))
    sel = np.flatnonzero((time >= t_from - 1e-9) & (time <= t_to + 1e-9))[::stride]
    if sel.size == 0:
        raise ValueError("window selects no samples")
    return RingdownWindow(values[sel] - offset, dt * stride, float(time[sel[0]]), offset)


def damping_ratio(sigma: float, omega: float) -> float:
    """Damping ratio in percent, ``|sigma| / |lambda| * 100``."""
    mag = math.hypot(sigma, omega)
    if mag == 0:
        raise ValueError("damping ratio is undefined for sigma = omega = 0")
    return abs(sigma) / mag * 100.0


def mode_frequency(omega: float) -> float:
    if omega < 0:
        raise ValueError("omega must be non-negative")
    return omega / (2.0 * math.pi)


def _prediction(x: np.ndarray, order: int, lags: int) -> np.ndarray:
    n = x.size
    a = np.column_stack([x[lags - k:n - k] for k in range(1, lags + 1)])
    b = x[lags:]
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s.size == 0 or s[0] == 0.0:
        raise NumericalError("prediction matrix is rank deficient (signal is identically zero)")
    rank = min(order, int(np.sum(s > s[0] * 1e-12)))
    return vt[:rank].T @ ((u[:, :rank].T @ b) / s[:rank])


def prony_fit(window: RingdownWindow, order: int = 2,
              prediction_order: int | None = None) -> list[ModalEstimate]:
    """Fit ``order`` complex exponentials and return one estimate per mode
    (conjugate pairs merged), sorted by decreasing energy in the window."""
    if not isinstance(order, (int, np.integer)) or order < 2 or order % 2:
        raise ValueError(f"order must be an even integer >= 2, got {order!r}")
    x = window.samples
    n = x.size
    if n < 4 * order:
        raise ValueError(f"window has {n} samples; at least {4 * order} required")
    lags = prediction_order if prediction_order is not None else min(max(order, n // 3),
                                                                    MAX_PREDICTION_ORDER)
    if not order <= lags <= n // 2:
        raise ValueError(f"prediction order must lie in [{order}, {n // 2}]")

    coef = _prediction(x, order, lags)
    roots = np.roots(np.concatenate([[1.0], -coef])).astype(complex)
    if np.any(np.abs(roots) == 0.0) and lags == order:
        raise NumericalError("characteristic polynomial has a root at z = 0")
    k = np.arange(n)
    tk = window.t_start + window.dt * k

    if lags > order:
        # energy ranking over all candidate roots; keep the `order` strongest
        cand = roots[np.abs(roots) > 0]
        vdm = cand[np.newaxis, :] ** k[:, np.newaxis]
        h = np.linalg.lstsq(vdm, x.astype(complex), rcond=None)[0]
        energy = np.abs(h) ** 2 * np.sum(np.abs(vdm) ** 2, axis=0)
        roots = _select_roots(cand, energy, order)
    if np.any(np.abs(roots) == 0.0):
        raise NumericalError("characteristic polynomial has a root at z = 0")

    lam = np.log(roots) / window.dt
    basis = np.exp(np.outer(tk, lam))
    h = np.linalg.lstsq(basis, x.astype(complex), rcond=None)[0]
    return _merge_modes(lam, h, basis, window.dt)


def _select_roots(cand: np.ndarray, energy: np.ndarray, order: int) -> np.ndarray:
    """Pick ``order`` roots by energy, treating conjugate pairs as one unit."""
    units: list[tuple[float, list[complex]]] = []
    taken = np.zeros(cand.size, dtype=bool)
    for i in np.argsort(-energy, kind="stable"):
        if taken[i]:
            continue
        taken[i] = True
        z = cand[i]
        members = [z]
        e = energy[i]
        if abs(z.imag) > 1e-12 * max(1.0, abs(z)):
            d = np.abs(cand - np.conj(z))
            d[taken] = np.inf
            j = int(np.argmin(d))
            if d[j] <= 1e-6 * abs(z):
                taken[j] = True
                e += energy[j]
            members = [z, np.conj(z)]
        else:
            members = [complex(z.real, 0.0)]
        units.append((e, members))
    units.sort(key=lambda u: -u[0])
    chosen: list[complex] = []
    rest = []
    for unit in units:
        if len(chosen) + len(unit[1]) <= order:
            chosen.extend(unit[1])
        else:
            rest.append(unit)
        if len(chosen) == order:
            break
    # low-rank signals (e.g. pure DC) leave a slot that only a pair would
    # fill; report the strongest leftover term so it can be flagged
    if len(chosen) < order and rest:
        real = [u for u in rest if len(u[1]) == 1]
        chosen.extend((real or rest)[0][1])
    return np.array(chosen, dtype=complex)


def _merge_modes(lam: np.ndarray, h: np.ndarray, basis: np.ndarray,
                 dt: float) -> list[ModalEstimate]:
    used = np.zeros(lam.size, dtype=bool)
    modes: list[ModalEstimate] = []
    nyquist = math.pi / dt
    scale = max(float(np.max(np.abs(basis @ h))), 1e-300)
    for i in np.argsort(-lam.imag, kind="stable"):
        if used[i]:
            continue
        used[i] = True
        li, hi = lam[i], h[i]
        if li.imag > 1e-12:
            j = next((j for j in range(lam.size) if not used[j]
                      and abs(lam[j] - np.conj(li)) <= 1e-6 * abs(li)), None)
            if j is not None:
                used[j] = True
            amp = 2.0 * abs(hi)
            phi = float(np.angle(hi))
            sigma, omega = float(li.real), float(li.imag)
            contrib = 2.0 * (basis[:, i] * hi).real
        else:
            amp = float(hi.real) if abs(li.imag) < 1e-12 else abs(hi)
            sigma = float(li.real)
            omega = 0.0 if abs(li.imag) < 1e-12 else float(abs(li.imag))
            phi = 0.0
            if amp < 0:
                amp, phi = -amp, math.pi
            contrib = (basis[:, i] * hi).real
        energy = float(np.sum(contrib ** 2))
        degenerate = (omega >= nyquist * (1 - 1e-9)) or (np.max(np.abs(contrib)) < 1e-9 * scale)
        zeta = damping_ratio(sigma, omega) if (sigma or omega) else 0.0
        modes.append(ModalEstimate(A=float(amp), sigma=sigma, omega=omega, phi=phi,
                                   f_mode=mode_frequency(omega), zeta=zeta, energy=energy,
                                   degenerate=bool(degenerate)))
    modes.sort(key=lambda m: (m.degenerate, -m.energy))
    return modes


def reconstruct(modes, time) -> np.ndarray:
    """Evaluate the damped-cosine sum on ``time``."""
    t = np.asarray(time, dtype=float)
    y = np.zeros_like(t)
    for m in modes:
        y += m.A * np.exp(m.sigma * t) * np.cos(m.omega * t + m.phi)
    return y


def dominant_mode(modes) -> ModalEstimate:
    """Highest-energy oscillatory mode, falling back to the highest-energy term."""
    osc = [m for m in modes if m.omega > 0 and not m.degenerate]
    pool = osc or [m for m in modes if not m.degenerate] or list(modes)
    if not pool:
        raise ValueError("no modes to choose from")
    return max(pool, key=lambda m: m.energy)
