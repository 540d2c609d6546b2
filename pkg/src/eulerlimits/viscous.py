"""Explicit finite-volume solver for the isentropic Euler system with an
added artificial viscosity ``eps * Laplacian`` on ``(rho, m)``.

Fluxes are local Lax-Friedrichs (Rusanov); time stepping is forward Euler.
Boundary cells see a frozen ghost layer holding the initial edge values,
which realises the far-field padding.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eos import GasParameters, relative_energy_isentropic_array, sound_speed, total_energy_isentropic_array
from .grid import Grid, SpaceTimeField

MAX_CFL = 0.45


class PositivityError(RuntimeError):
    pass


@dataclass
class RunLog:
    steps: int = 0
    cfl: float = 0.0
    eps: float = 0.0
    dt_min: float = np.inf
    dt_max: float = 0.0
    min_density: float = np.inf
    energy: list = field(default_factory=list)
    max_energy_increase: float = 0.0

    def as_dict(self) -> dict:
        return {
            "steps": self.steps,
            "cfl": self.cfl,
            "eps": self.eps,
            "dt_min": self.dt_min,
            "dt_max": self.dt_max,
            "min_density": self.min_density,
            "max_energy_increase": self.max_energy_increase,
        }


def _flux(U, axis, g):
    rho = U[0]
    m = U[1:]
    u_ax = m[axis] / rho
    F = np.empty_like(U)
    F[0] = m[axis]
    F[1:] = m * u_ax
    F[1 + axis] += g.a * rho**g.gamma
    return F, np.abs(u_ax) + sound_speed(rho, g)


def _take(U, axis, sl):
    idx = [slice(None)] * U.ndim
    idx[axis + 1] = sl
    return U[tuple(idx)]


def _interior(dim):
    return (slice(None),) + (slice(1, -1),) * dim


def solve_isentropic(rho0, m0, grid: Grid, g: GasParameters, eps: float, times,
                     cfl: float = MAX_CFL, eps_min_ratio: float = 0.25, far=None,
                     level: int = 0, meta: dict | None = None) -> SpaceTimeField:
    """March the viscous isentropic system to every time in ``times``.

    Raises ``ValueError`` on a CFL above 0.45 or an unresolved viscosity and
    ``PositivityError`` if the density ever becomes nonpositive.
    """
    if not 0 < cfl <= MAX_CFL:
        raise ValueError(f"CFL number {cfl} outside (0, {MAX_CFL}]")
    h = grid.h
    if eps < 0 or (eps < eps_min_ratio * h and eps_min_ratio > 0):
        raise ValueError(f"viscosity eps={eps:g} unresolved on h={h:g} (need eps >= {eps_min_ratio}*h)")
    times = np.asarray(times, dtype=float)
    d = grid.dim
    U = np.concatenate([np.asarray(rho0, dtype=float)[None], np.asarray(m0, dtype=float)])
    if U.shape != (1 + d,) + grid.cells:
        raise ValueError("initial data do not match the grid")
    if np.any(U[0] <= 0):
        raise PositivityError("initial density must be positive")

    pad = [(0, 0)] + [(1, 1)] * d
    Upad = np.pad(U, pad, mode="edge")
    inner = _interior(d)

    out_rho = np.empty((len(times),) + grid.cells)
    out_m = np.empty((len(times), d) + grid.cells)
    out_rho[0], out_m[0] = U[0], U[1:]
    log = RunLog(cfl=cfl, eps=eps, min_density=float(U[0].min()))

    def energy(rho, m):
        if far is not None:
            e = relative_energy_isentropic_array(rho, m, far.rho_inf, np.asarray(far.m_inf), g)
        else:
            e = total_energy_isentropic_array(rho, m, g)
        return float(e.sum() * grid.cell_volume)

    log.energy.append(energy(U[0], U[1:]))
    t = 0.0
    for k_out in range(1, len(times)):
        t_target = times[k_out]
        while t < t_target - 1e-14 * max(1.0, t_target):
            Upad[inner] = U
            rate = np.zeros_like(U)
            speed_sum = 0.0
            for ax in range(d):
                F, lam = _flux(Upad, ax, g)
                # faces between padded cells i and i+1 along ax
                UL, UR = _take(Upad, ax, slice(0, -1)), _take(Upad, ax, slice(1, None))
                FL, FR = _take(F, ax, slice(0, -1)), _take(F, ax, slice(1, None))
                lam_f = np.maximum(_take(lam[None], ax, slice(0, -1))[0], _take(lam[None], ax, slice(1, None))[0])
                Fhat = 0.5 * (FL + FR) - 0.5 * lam_f[None] * (UR - UL)
                # restrict transverse axes to the interior
                sl = [slice(None)] + [slice(1, -1)] * d
                sl[ax + 1] = slice(None)
                Fhat = Fhat[tuple(sl)]
                div = (_take(Fhat, ax, slice(1, None)) - _take(Fhat, ax, slice(0, -1))) / h
                Usl = Upad[tuple(sl)]
                lap = (_take(Usl, ax, slice(2, None)) - 2.0 * _take(Usl, ax, slice(1, -1))
                       + _take(Usl, ax, slice(0, -2))) / h**2
                rate += -div + eps * lap
                speed_sum += float(lam[inner[1:]].max())
            dt = cfl / (speed_sum / h + 2.0 * d * eps / h**2)
            dt = min(dt, t_target - t)
            U = U + dt * rate
            t += dt
            log.steps += 1
            log.dt_min = min(log.dt_min, dt)
            log.dt_max = max(log.dt_max, dt)
            rmin = float(U[0].min())
            log.min_density = min(log.min_density, rmin)
            if not rmin > 0 or not np.all(np.isfinite(U)):
                raise PositivityError("positivity lost; reduce CFL or raise eps")
        t = t_target
        out_rho[k_out], out_m[k_out] = U[0], U[1:]
        e = energy(U[0], U[1:])
        log.max_energy_increase = max(log.max_energy_increase, e - log.energy[-1])
        log.energy.append(e)

    info = {"generator": "vanishing_viscosity", "eps": eps, "h": h, "log": log.as_dict(),
            "energy_history": list(log.energy)}
    info.update(meta or {})
    return SpaceTimeField(grid, times, out_rho, out_m, None, far, level, meta=info)
