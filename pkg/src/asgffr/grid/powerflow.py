"""Newton-Raphson load flow and machine initialization."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NumericalError
from .network import GridModel


@dataclass(frozen=True)
class OperatingPoint:
    """Converged load flow plus the classical-machine initial conditions."""

    v: np.ndarray          # complex bus voltages, pu
    p_gen: np.ndarray      # machine active output, pu on s_base
    q_gen: np.ndarray
    e_mag: np.ndarray      # |E'| behind xd'
    delta: np.ndarray      # rotor angles, rad
    iterations: int
    mismatch: float


def _injections(model: GridModel) -> tuple[np.ndarray, np.ndarray]:
    n = len(model.buses)
    p = np.zeros(n)
    q = np.zeros(n)
    for m in model.machines:
        p[model.index(m.bus)] += m.p_mw / model.s_base
    for ld in model.loads:
        k = model.index(ld.bus)
        p[k] -= ld.p_mw / model.s_base
        q[k] -= ld.q_mvar / model.s_base
    return p, q


def solve_power_flow(model: GridModel, tol: float = 1e-8, max_iter: int = 50) -> OperatingPoint:
    """Polar Newton-Raphson.  Raises :class:`NumericalError` if the mismatch
    does not fall below ``tol`` within ``max_iter`` iterations."""
    y = model.ybus
    n = len(model.buses)
    p_spec, q_spec = _injections(model)
    kinds = [b.kind for b in model.buses]
    vm = np.ones(n)
    va = np.zeros(n)
    for m in model.machines:
        vm[model.index(m.bus)] = m.v_set
    pvpq = np.array([k for k in range(n) if kinds[k] != "slack"], dtype=int)
    pq = np.array([k for k in range(n) if kinds[k] == "pq"], dtype=int)

    def mismatch(vm, va):
        v = vm * np.exp(1j * va)
        s = v * np.conj(y @ v)
        return np.concatenate([s.real[pvpq] - p_spec[pvpq], s.imag[pq] - q_spec[pq]]), v

    f, v = mismatch(vm, va)
    it = 0
    while np.max(np.abs(f), initial=0.0) >= tol:
        if it >= max_iter:
            raise NumericalError(
                f"load flow did not converge in {max_iter} iterations (mismatch {np.max(np.abs(f)):.3e} pu)")
        it += 1
        ibus = y @ v
        diag_v = np.diag(v)
        diag_i = np.diag(ibus)
        diag_vn = np.diag(v / vm)
        ds_dva = 1j * diag_v @ np.conj(diag_i - y @ diag_v)
        ds_dvm = diag_v @ np.conj(y @ diag_vn) + np.conj(diag_i) @ diag_vn
        jac = np.block([
            [ds_dva.real[np.ix_(pvpq, pvpq)], ds_dvm.real[np.ix_(pvpq, pq)]],
            [ds_dva.imag[np.ix_(pq, pvpq)], ds_dvm.imag[np.ix_(pq, pq)]],
        ])
        try:
            dx = np.linalg.solve(jac, -f)
        except np.linalg.LinAlgError as exc:
            raise NumericalError(f"singular load-flow Jacobian: {exc}") from exc
        va[pvpq] += dx[: pvpq.size]
        vm[pq] += dx[pvpq.size:]
        if not np.all(np.isfinite(vm)) or np.any(vm <= 0.05):
            raise NumericalError("load flow diverged (voltage collapse)")
        f, v = mismatch(vm, va)

    s_bus = v * np.conj(y @ v)
    load_s = np.zeros(n, dtype=complex)
    for ld in model.loads:
        load_s[model.index(ld.bus)] += complex(ld.p_mw, ld.q_mvar) / model.s_base
    gen_idx = [model.index(m.bus) for m in model.machines]
    s_gen = s_bus[gen_idx] + load_s[gen_idx]
    xd = np.array([m.xd_prime for m in model.machines])
    i_gen = np.conj(s_gen / v[gen_idx])
    e = v[gen_idx] + 1j * xd * i_gen
    return OperatingPoint(v=v, p_gen=s_gen.real, q_gen=s_gen.imag, e_mag=np.abs(e),
                          delta=np.angle(e), iterations=it,
                          mismatch=float(np.max(np.abs(f), initial=0.0)))
