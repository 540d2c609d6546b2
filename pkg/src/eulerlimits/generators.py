"""Approximation sequences: constant states, vanishing-viscosity runs, exact
Riemann targets, and synthetic oscillation / concentration families.

Levels are numbered from 1.  Level ``n`` uses ``base_cells * 2**(n-1)``
cells per axis, so every level refines the previous one by a factor 2.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eos import FarField, FullState, GasParameters, IsentropicState
from .grid import Grid, SpaceTimeField, _quartic, constant_field, prolong
from .riemann import RiemannData, riemann_exact_isentropic
from .viscous import solve_isentropic


@dataclass(frozen=True)
class SequenceSpec:
    """Parameters shared by every member of an approximation sequence.

    ``eps0`` is the level-1 viscosity; when omitted it is ``eps_ratio * h_1``.
    Viscosities decay by ``eps_decay`` per level.
    """

    levels: int = 5
    base_cells: tuple = (128,)
    extent: tuple = ((-1.0, 1.0),)
    g: GasParameters = field(default_factory=GasParameters)
    far: FarField = field(default_factory=lambda: FarField(1.0, (0.0,)))
    T: float = 0.25
    n_times: int = 201
    eps0: float | None = None
    eps_ratio: float = 0.5
    eps_decay: float = 0.5
    initial: dict = field(default_factory=lambda: {"kind": "constant"})
    entropy_floor: float | None = None
    pad: float = 0.25
    boundary_mode: str = "far_field_padded"
    cfl: float = 0.45

    def __post_init__(self):
        object.__setattr__(self, "base_cells", tuple(int(c) for c in np.atleast_1d(self.base_cells)))
        object.__setattr__(self, "extent", tuple(tuple(map(float, e)) for e in self.extent))
        if self.levels < 1:
            raise ValueError("a sequence needs at least one level")
        if not self.T > 0:
            raise ValueError("final time must be positive")
        if not 0 < self.eps_decay < 1:
            raise ValueError("viscosities must decrease strictly")
        if self.n_times < 2:
            raise ValueError("need at least two output times")
        if self.far.dim != len(self.base_cells):
            raise ValueError("far-field dimension does not match the grid")

    @property
    def dim(self) -> int:
        return len(self.base_cells)

    def grid(self, level: int) -> Grid:
        if not 1 <= level <= self.levels:
            raise ValueError(f"level {level} outside 1..{self.levels}")
        cells = tuple(c * 2 ** (level - 1) for c in self.base_cells)
        return Grid(cells, self.extent, self.boundary_mode, self.pad)

    @property
    def grids(self) -> list:
        return [self.grid(n) for n in range(1, self.levels + 1)]

    @property
    def viscosities(self) -> list:
        eps0 = self.eps0 if self.eps0 is not None else self.eps_ratio * self.grid(1).h
        return [eps0 * self.eps_decay ** (n - 1) for n in range(1, self.levels + 1)]

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.T, self.n_times)


# --------------------------------------------------------------------------
# Initial data
# --------------------------------------------------------------------------


def riemann_data(spec: SequenceSpec) -> RiemannData:
    ini = spec.initial
    if ini.get("kind") != "riemann":
        raise ValueError("initial data are not a Riemann problem")
    L, R = ini["left"], ini["right"]
    return RiemannData(
        IsentropicState(L["rho"], (L["rho"] * L.get("u", 0.0),)),
        IsentropicState(R["rho"], (R["rho"] * R.get("u", 0.0),)),
        float(ini.get("interface", 0.0)),
    )


def initial_data(spec: SequenceSpec, grid: Grid):
    """Cell values ``(rho0, m0)`` of the declared initial data."""
    ini = spec.initial
    kind = ini.get("kind", "constant")
    far = spec.far
    d = grid.dim
    if kind == "constant":
        rho = np.full(grid.cells, far.rho_inf)
        m = np.broadcast_to(np.asarray(far.m_inf).reshape((d,) + (1,) * d), (d,) + grid.cells).copy()
    elif kind == "riemann":
        if d != 1:
            raise ValueError("Riemann initial data are one-dimensional")
        data = riemann_data(spec)
        x = grid.axis_centers(0)
        left = x < data.interface
        rho = np.where(left, data.left.rho, data.right.rho)
        m = np.where(left, data.left.m[0], data.right.m[0])[None]
    elif kind == "pulse":
        # smooth density bump on top of the far field, carried by u_inf
        X = grid.centers()
        c = np.asarray(ini.get("center", (0.0,) * d), dtype=float).reshape((d,) + (1,) * d)
        r = float(ini.get("radius", 0.3))
        prof = np.prod(_quartic((X - c) / r)[0], axis=0)
        rho = far.rho_inf * (1.0 + float(ini.get("amplitude", 0.2)) * prof)
        u = np.asarray(far.u_inf).reshape((d,) + (1,) * d)
        m = rho[None] * u
    else:
        raise ValueError(f"unknown initial data kind {kind!r}")
    return rho, m


# --------------------------------------------------------------------------
# Generators
# --------------------------------------------------------------------------


def constant_state_sequence(spec: SequenceSpec, S: float | None = None) -> list:
    """Every level identically equal to the far-field state."""
    out = []
    for n in range(1, spec.levels + 1):
        f = constant_field(spec.grid(n), spec.times(), spec.far.rho_inf, spec.far.m_inf, S, spec.far, n)
        out.append(f.replace(meta={"generator": "constant_state"}))
    return out


def vanishing_viscosity_solve(spec: SequenceSpec, level: int) -> SpaceTimeField:
    grid = spec.grid(level)
    eps = spec.viscosities[level - 1]
    rho0, m0 = initial_data(spec, grid)
    return solve_isentropic(rho0, m0, grid, spec.g, eps, spec.times(), cfl=spec.cfl,
                            far=spec.far, level=level, meta={"initial": dict(spec.initial)})


def viscous_sequence(spec: SequenceSpec) -> list:
    return [vanishing_viscosity_solve(spec, n) for n in range(1, spec.levels + 1)]


def riemann_targets(spec: SequenceSpec, time_refine: bool = False) -> list:
    """The exact Riemann solution sampled on every level's grid.

    With ``time_refine`` the number of time intervals doubles with the level,
    so that time quadrature of moving discontinuities keeps pace with the
    spatial resolution.
    """
    data = riemann_data(spec)
    out = []
    for n in range(1, spec.levels + 1):
        times = spec.times()
        if time_refine:
            times = np.linspace(0.0, spec.T, (spec.n_times - 1) * 2 ** (n - 1) + 1)
        out.append(riemann_exact_isentropic(data, spec.g, spec.grid(n), times, n, spec.far))
    return out


def _state_arrays(state, grid):
    d = grid.dim
    shape = (d,) + (1,) * d
    rho = np.full(grid.cells, float(state.rho))
    m = np.broadcast_to(np.asarray(state.m, dtype=float).reshape(shape), (d,) + grid.cells)
    S = np.full(grid.cells, float(state.S)) if isinstance(state, FullState) else None
    return rho, m, S


def _on_vertices(value, lo, h):
    k = (value - lo) / h
    return abs(k - round(k)) < 1e-9


def oscillatory_two_state(spec: SequenceSpec, A, B, lam: float, region=None,
                          outside=None, cells_per_period: int = 8) -> list:
    """Laminate of ``A`` (volume fraction ``lam``) and ``B`` inside ``region``.

    The pattern varies along the first axis only (stripes in 2-D) with a
    period of ``cells_per_period`` fine cells, so the period halves with
    every level.  Outside ``region`` the field equals ``outside`` (the far
    state by default).  Fields are constant in time.
    """
    if not 0 < lam <= 1:
        raise ValueError("volume fraction must lie in (0, 1]")
    if type(A) is not type(B):
        raise ValueError("both states must be of the same kind")
    full = isinstance(A, FullState)
    k_A = lam * cells_per_period
    if abs(k_A - round(k_A)) > 1e-9:
        raise ValueError("volume fraction not representable with this period")
    k_A = int(round(k_A))
    if outside is None:
        if full:
            raise ValueError("full-system laminates need an explicit outside state")
        outside = spec.far.state()
    g1 = spec.grid(1)
    if region is None:
        region = tuple(((3 * lo + hi) / 4, (lo + 3 * hi) / 4) for lo, hi in g1.inner)
    region = tuple(tuple(map(float, r)) for r in region)
    for (lo, hi), (rlo, rhi) in zip(g1.extent, region):
        if not (_on_vertices(rlo, lo, g1.h) and _on_vertices(rhi, lo, g1.h)):
            raise ValueError("laminate region must sit on level-1 cell faces")
    times = spec.times()
    nt = len(times)
    out = []
    for n in range(1, spec.levels + 1):
        grid = spec.grid(n)
        X = grid.centers()
        inside = np.ones(grid.cells, dtype=bool)
        for k, (rlo, rhi) in enumerate(region):
            inside &= (X[k] > rlo) & (X[k] < rhi)
        i = np.floor((X[0] - region[0][0]) / grid.h + 1e-9).astype(int)
        is_A = inside & (np.mod(i, cells_per_period) < k_A)
        is_B = inside & ~is_A
        arrays = []
        for st in (A, B, outside):
            arrays.append(_state_arrays(st, grid))
        rho = np.where(is_A, arrays[0][0], np.where(is_B, arrays[1][0], arrays[2][0]))
        m = np.where(is_A[None], arrays[0][1], np.where(is_B[None], arrays[1][1], arrays[2][1]))
        S = None
        if full:
            S = np.where(is_A, arrays[0][2], np.where(is_B, arrays[1][2], arrays[2][2]))
            S = np.broadcast_to(S, (nt,) + grid.cells)
        meta = {"generator": "oscillatory_two_state", "lambda": lam, "region": region,
                "cells_per_period": cells_per_period, "period": cells_per_period * grid.h,
                "A": np.asarray(A.as_array()).tolist(), "B": np.asarray(B.as_array()).tolist()}
        out.append(SpaceTimeField(grid, times, np.broadcast_to(rho, (nt,) + grid.cells),
                                  np.broadcast_to(m, (nt,) + m.shape), S, spec.far, n, meta))
    return out


def concentration_bump(spec: SequenceSpec, x0=None, radius_cells: int = 8,
                       amplitude: float = 1.0) -> list:
    """Momentum bump concentrating at ``x0``.

    Level ``n`` carries ``m_inf + s^{d/2} chi(s (x - x0)) e_1`` with
    ``s = 2**(n-1)``.  ``chi`` is a quartic bump of radius
    ``radius_cells * h_1``.  With ``x0`` on a level-1 cell vertex the
    sampled kinetic energy is identical on every level.
    """
    g1 = spec.grid(1)
    d = spec.dim
    h1 = g1.h
    if x0 is None:
        x0 = []
        for (lo, _), (ilo, ihi) in zip(g1.extent, g1.inner):
            mid = 0.5 * (ilo + ihi)
            x0.append(lo + round((mid - lo) / h1) * h1)
    x0 = np.asarray(x0, dtype=float).ravel()
    for (lo, _), c in zip(g1.extent, x0):
        if not _on_vertices(c, lo, h1):
            raise ValueError("concentration centre must be a level-1 cell vertex")
    r0 = radius_cells * h1
    for (ilo, ihi), c in zip(g1.inner, x0):
        if c - r0 <= ilo or c + r0 >= ihi:
            raise ValueError("bump support leaves the inner box at level 1")
    rho_inf = spec.far.rho_inf
    times = spec.times()
    nt = len(times)
    out = []
    norm2 = None
    for n in range(1, spec.levels + 1):
        grid = spec.grid(n)
        s = 2.0 ** (n - 1)
        X = grid.centers()
        Y = s * (X - x0.reshape((d,) + (1,) * d)) / r0
        chi = amplitude * np.prod(_quartic(Y)[0], axis=0)
        m = np.broadcast_to(np.asarray(spec.far.m_inf).reshape((d,) + (1,) * d), (d,) + grid.cells).copy()
        m[0] += s ** (d / 2.0) * chi
        if n == 1:
            norm2 = float(np.sum(chi**2) * grid.cell_volume)
        meta = {"generator": "concentration_bump", "x0": x0.tolist(), "radius": r0,
                "scale": s, "chi_norm2": norm2, "kinetic": norm2 / (2.0 * rho_inf)}
        out.append(SpaceTimeField(grid, times, np.full((nt,) + grid.cells, rho_inf),
                                  np.broadcast_to(m, (nt,) + m.shape), None, spec.far, n, meta))
    return out


def full_constant_sequence(spec: SequenceSpec, state: FullState) -> list:
    out = []
    for n in range(1, spec.levels + 1):
        f = constant_field(spec.grid(n), spec.times(), state.rho, state.m, state.S, spec.far, n)
        out.append(f.replace(meta={"generator": "full_constant"}))
    return out


def frozen_sequence(field_: SpaceTimeField, levels: int) -> list:
    """The same coarse field prolonged onto ``levels`` successively refined grids."""
    out = []
    for n in range(1, levels + 1):
        fine = field_.grid.refine(2 ** (n - 1))
        rho = prolong(field_.rho, field_.grid, fine)
        m = prolong(field_.m, field_.grid, fine)
        S = None if field_.S is None else prolong(field_.S, field_.grid, fine)
        out.append(SpaceTimeField(fine, field_.times, rho, m, S, field_.far, n,
                                  {"generator": "frozen"}))
    return out


def time_reversed(field_: SpaceTimeField) -> SpaceTimeField:
    """Play a run backwards (momentum flips sign)."""
    return field_.replace(rho=field_.rho[::-1], m=-field_.m[::-1],
                          S=None if field_.S is None else field_.S[::-1],
                          meta={**field_.meta, "time_reversed": True})


def to_full(field_: SpaceTimeField, s0: float) -> SpaceTimeField:
    """Map an isentropic run to full variables with constant specific entropy."""
    return field_.replace(S=field_.rho * s0, meta={**field_.meta, "specific_entropy": s0})


# --------------------------------------------------------------------------
# Manufactured fields with known source terms
# --------------------------------------------------------------------------


def _profile(grid: Grid, center, radius):
    X = grid.centers()
    c = np.asarray(center, dtype=float).reshape((grid.dim,) + (1,) * grid.dim)
    return np.prod(_quartic((X - c) / radius)[0], axis=0)


def manufactured_field(grid: Grid, times, kind: str, amplitude: float, center, radius: float,
                       g: GasParameters, rho0: float = 1.0, s0: float = 0.0) -> SpaceTimeField:
    """Fields at rest whose only evolution is an injected source ``amplitude * b(x)``.

    ``mass_source``: ``rho = rho0 + amplitude t b``.
    ``energy_leak``: full system, total energy ``E0 + amplitude t b`` at fixed density.
    ``heating``: full system, ``S = rho0 (s0 + amplitude t b)``.
    """
    times = np.asarray(times, dtype=float)
    b = _profile(grid, center, radius)
    tb = times.reshape((-1,) + (1,) * grid.dim) * b[None]
    nt = len(times)
    m = np.zeros((nt, grid.dim) + grid.cells)
    rho = np.full((nt,) + grid.cells, rho0)
    S = None
    if kind == "mass_source":
        rho = rho0 + amplitude * tb
    elif kind == "energy_leak":
        E0 = rho0**g.gamma * np.exp(s0 / g.c_v)
        E = E0 + amplitude * tb
        if np.any(E <= 0):
            raise ValueError("energy leak drives the energy negative")
        S = g.c_v * rho0 * np.log(E / rho0**g.gamma)
    elif kind == "heating":
        S = rho0 * (s0 + amplitude * tb)
    else:
        raise ValueError(f"unknown manufactured field {kind!r}")
    return SpaceTimeField(grid, times, rho, m, S, None, 0,
                          {"generator": "manufactured", "kind": kind, "amplitude": amplitude,
                           "center": list(np.atleast_1d(center)), "radius": radius})


# --------------------------------------------------------------------------
# Entropy floor
# --------------------------------------------------------------------------


@dataclass
class EntropyFloorReport:
    applicable: bool
    violations: int = 0
    worst: float = 0.0
    cells: list = field(default_factory=list)
    correction_mass: float = 0.0
    clipped: bool = False
    vacuum_negative_S: int = 0   # cells with rho = 0 and S < 0, admissible for E but not as a solution

    @property
    def ok(self) -> bool:
        return (not self.applicable) or self.violations == 0


def entropy_floor_enforce(field_: SpaceTimeField, s_lower: float, clip: bool = False,
                          max_listed: int = 20):
    """Check ``S >= rho * s_lower`` cellwise; optionally raise ``S`` to the floor.

    Returns ``(field, report)``.  Isentropic fields are returned unchanged with
    a "not applicable" report.
    """
    if not field_.is_full:
        return field_, EntropyFloorReport(applicable=False)
    floor = field_.rho * s_lower
    deficit = floor - field_.S
    bad = deficit > 0
    idx = np.argwhere(bad)
    rep = EntropyFloorReport(True, int(bad.sum()), float(deficit.max(initial=0.0)),
                             [tuple(int(v) for v in i) for i in idx[:max_listed]],
                             vacuum_negative_S=int(np.sum((field_.rho == 0) & (field_.S < 0))))
    if clip and rep.violations:
        S = np.where(bad, floor, field_.S)
        w = np.trapezoid if hasattr(np, "trapezoid") else np.trapz
        per_time = np.where(bad, deficit, 0.0).reshape(field_.nt, -1).sum(axis=1) * field_.grid.cell_volume
        rep.correction_mass = float(w(per_time, field_.times)) if field_.nt > 1 else float(per_time[0])
        rep.clipped = True
        field_ = field_.replace(S=S, meta={**field_.meta, "entropy_clipped": rep.violations})
    return field_, rep
