"""Exact self-similar solution of the 1-D isentropic Riemann problem.

For ``p = a rho^gamma`` the middle state is found by intersecting the
1-wave curve through the left state with the 2-wave curve through the right
state (Hugoniot branch for compression, Riemann-invariant branch for
expansion), using bisection in the middle density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .eos import GasParameters, IsentropicState, sound_speed


class VacuumError(ValueError):
    pass


@dataclass(frozen=True)
class RiemannData:
    left: IsentropicState
    right: IsentropicState
    interface: float = 0.0

    def __post_init__(self):
        if not (self.left.rho > 0 and self.right.rho > 0):
            raise ValueError("Riemann states must have positive density")
        if len(self.left.m) != 1 or len(self.right.m) != 1:
            raise ValueError("the exact solver is one-dimensional")


@dataclass(frozen=True)
class RiemannSolution:
    """Wave structure of the solved problem; ``sample`` evaluates it."""

    data: RiemannData
    g: GasParameters
    rho_star: float
    u_star: float
    left_wave: str
    right_wave: str
    left_speeds: tuple
    right_speeds: tuple

    def sample(self, xi):
        """Density and velocity at similarity coordinates ``xi = x/t``."""
        xi = np.asarray(xi, dtype=float)
        g = self.g
        L, R = self.data.left, self.data.right
        uL, uR = L.m[0] / L.rho, R.m[0] / R.rho
        cL, cR = sound_speed(L.rho, g), sound_speed(R.rho, g)
        k = 2.0 / (g.gamma - 1.0)
        rho = np.full(xi.shape, self.rho_star)
        u = np.full(xi.shape, self.u_star)

        lh, lt = self.left_speeds
        rt, rh = self.right_speeds
        left_zone = xi < lh
        rho = np.where(left_zone, L.rho, rho)
        u = np.where(left_zone, uL, u)
        if self.left_wave == "rarefaction":
            fan = (xi >= lh) & (xi < lt)
            c = (uL + k * cL - xi) / (1.0 + k)
            rho = np.where(fan, _rho_from_c(c, g), rho)
            u = np.where(fan, xi + c, u)
        right_zone = xi > rh
        rho = np.where(right_zone, R.rho, rho)
        u = np.where(right_zone, uR, u)
        if self.right_wave == "rarefaction":
            fan = (xi > rt) & (xi <= rh)
            c = (xi - uR + k * cR) / (1.0 + k)
            rho = np.where(fan, _rho_from_c(c, g), rho)
            u = np.where(fan, xi - c, u)
        return rho, u


def _rho_from_c(c, g):
    c = np.maximum(c, 0.0)
    return (c * c / (g.a * g.gamma)) ** (1.0 / (g.gamma - 1.0))


def _wave_velocity(rho, rho_k, u_k, g, side):
    """Velocity reached on the wave curve of ``side`` at density ``rho``."""
    k = 2.0 / (g.gamma - 1.0)
    sgn = -1.0 if side == "left" else 1.0
    if rho > rho_k:
        p, pk = g.a * rho**g.gamma, g.a * rho_k**g.gamma
        jump = math.sqrt((p - pk) * (rho - rho_k) / (rho * rho_k))
    else:
        jump = k * (sound_speed(rho, g) - sound_speed(rho_k, g))
    return u_k + sgn * jump


def solve_riemann(data: RiemannData, g: GasParameters, tol: float = 1e-12) -> RiemannSolution:
    if not 1.0 < g.gamma <= 3.0:
        raise ValueError("gamma must lie in (1, 3]")
    L, R = data.left, data.right
    uL, uR = L.m[0] / L.rho, R.m[0] / R.rho
    cL, cR = sound_speed(L.rho, g), sound_speed(R.rho, g)
    k = 2.0 / (g.gamma - 1.0)
    if uR - uL >= k * (cL + cR):
        raise VacuumError("vacuum Riemann problem out of scope")

    def f(rho):
        return _wave_velocity(rho, L.rho, uL, g, "left") - _wave_velocity(rho, R.rho, uR, g, "right")

    lo = 0.0
    hi = max(L.rho, R.rho)
    while f(hi) > 0:
        hi *= 2.0
    # f is decreasing in rho; f(0+) > 0 away from vacuum
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= tol * max(hi, 1.0):
            break
    rho_s = 0.5 * (lo + hi)
    if rho_s <= 0:
        raise VacuumError("vacuum Riemann problem out of scope")
    u_s = 0.5 * (_wave_velocity(rho_s, L.rho, uL, g, "left") + _wave_velocity(rho_s, R.rho, uR, g, "right"))
    c_s = sound_speed(rho_s, g)

    if rho_s > L.rho:
        s = (rho_s * u_s - L.rho * uL) / (rho_s - L.rho)
        left_wave, left_speeds = "shock", (s, s)
    else:
        left_wave, left_speeds = "rarefaction", (uL - cL, u_s - c_s)
    if rho_s > R.rho:
        s = (rho_s * u_s - R.rho * uR) / (rho_s - R.rho)
        right_wave, right_speeds = "shock", (s, s)
    else:
        right_wave, right_speeds = "rarefaction", (u_s + c_s, uR + cR)
    # equal states: no waves at all
    if abs(rho_s - L.rho) <= tol * L.rho and abs(rho_s - R.rho) <= tol * R.rho:
        left_wave = right_wave = "none"
        left_speeds = (u_s, u_s)
        right_speeds = (u_s, u_s)
    return RiemannSolution(data, g, rho_s, u_s, left_wave, right_wave, left_speeds, right_speeds)


def shock_partner(state: IsentropicState, rho_other: float, g: GasParameters,
                  family: int = 1) -> IsentropicState:
    """State joined to ``state`` by an admissible ``family``-shock.

    ``family=1``: ``state`` is the left (pre-shock) state and the returned
    right state has the larger density.  ``family=2``: ``state`` is the right
    state.
    """
    if rho_other <= state.rho:
        raise ValueError("an admissible shock needs compression behind it")
    u = state.m[0] / state.rho
    side = "left" if family == 1 else "right"
    u_other = _wave_velocity(rho_other, state.rho, u, g, side)
    return IsentropicState(rho_other, (rho_other * u_other,))


def lax_check(sol: RiemannSolution) -> dict:
    """Lax entropy inequalities for every shock in the solution."""
    g = sol.g
    L, R = sol.data.left, sol.data.right
    out = {}
    c_s = sound_speed(sol.rho_star, g)
    if sol.left_wave == "shock":
        s = sol.left_speeds[0]
        lam_l = L.m[0] / L.rho - sound_speed(L.rho, g)
        lam_s = sol.u_star - c_s
        out["left"] = (lam_l > s > lam_s, lam_l, s, lam_s)
    if sol.right_wave == "shock":
        s = sol.right_speeds[0]
        lam_s = sol.u_star + c_s
        lam_r = R.m[0] / R.rho + sound_speed(R.rho, g)
        out["right"] = (lam_s > s > lam_r, lam_s, s, lam_r)
    return out


def rankine_hugoniot_residual(sol: RiemannSolution) -> float:
    """Max relative RH defect ``|s[U] - [F(U)]|`` over the solution's shocks."""
    g = sol.g
    worst = 0.0
    pairs = []
    if sol.left_wave == "shock":
        pairs.append((sol.data.left, sol.left_speeds[0]))
    if sol.right_wave == "shock":
        pairs.append((sol.data.right, sol.right_speeds[0]))
    star = (sol.rho_star, sol.rho_star * sol.u_star)
    for st, s in pairs:
        U0 = np.array([st.rho, st.m[0]])
        U1 = np.array(star)
        F = lambda U: np.array([U[1], U[1] ** 2 / U[0] + g.a * U[0] ** g.gamma])
        res = s * (U1 - U0) - (F(U1) - F(U0))
        scale = max(np.abs(F(U1)).max(), np.abs(F(U0)).max(), 1.0)
        worst = max(worst, float(np.abs(res).max()) / scale)
    return worst


def riemann_exact_isentropic(data: RiemannData, g: GasParameters, grid, times,
                             level: int = 0, far=None):
    """Sample the exact solution at cell centres and the requested times."""
    from .grid import SpaceTimeField

    if grid.dim != 1:
        raise ValueError("the exact Riemann sampler is one-dimensional")
    sol = solve_riemann(data, g)
    times = np.asarray(times, dtype=float)
    x = grid.axis_centers(0) - data.interface
    rho = np.empty((len(times), grid.cells[0]))
    u = np.empty_like(rho)
    for k, t in enumerate(times):
        if t == 0.0:
            rho[k] = np.where(x < 0, data.left.rho, data.right.rho)
            u[k] = np.where(x < 0, data.left.m[0] / data.left.rho, data.right.m[0] / data.right.rho)
        else:
            rho[k], u[k] = sol.sample(x / t)
    m = (rho * u)[:, None, :]
    return SpaceTimeField(grid, times, rho, m, None, far, level,
                          meta={"generator": "riemann_exact", "rho_star": sol.rho_star,
                                "u_star": sol.u_star, "waves": (sol.left_wave, sol.right_wave)})
