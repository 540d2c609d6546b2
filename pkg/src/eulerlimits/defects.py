"""Weak limits and defect measures of approximation sequences.

All measures live on a coarse grid whose cells are unions of fine cells of
every level.  Per-level cell integrals are time-averaged over a window and
then extrapolated in the level index (Aitken's delta-squared process when
the tail looks geometric, the last level otherwise).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .eos import GasParameters, pressure_potential, relative_energy_isentropic_array
from .grid import Grid, SpaceTimeField, block_sum, prolong, trapezoid_weights

LAST, AITKEN = 0, 1


# --------------------------------------------------------------------------
# Extrapolation in the level index
# --------------------------------------------------------------------------


def extrapolate_levels(values, ratio_max: float = 0.9, rtol: float = 1e-12):
    """Extrapolate ``values[n]`` (level axis first) to ``n -> infinity``.

    Returns ``(limit, method)`` with ``method`` 1 where Aitken's process was
    used and 0 where the last level was kept.  Aitken requires successive
    difference ratios ``r`` with ``|r| < ratio_max``; with four or more
    levels the last two ratios must also agree to within 50%.
    """
    V = np.asarray(values, dtype=float)
    if V.shape[0] < 3:
        raise ValueError("cannot extrapolate from fewer than 3 levels")
    scale = max(float(np.abs(V).max()), 1e-300)
    a, b, c = V[-3], V[-2], V[-1]
    d1, d2 = b - a, c - b
    tiny = rtol * scale
    ok = (np.abs(d1) > tiny) & (np.abs(d2) > tiny)
    r = np.where(ok, d2 / np.where(ok, d1, 1.0), 0.0)
    geo = ok & (np.abs(r) < ratio_max)
    if V.shape[0] >= 4:
        d0 = a - V[-4]
        ok0 = np.abs(d0) > tiny
        r0 = np.where(ok0, d1 / np.where(ok0, d0, 1.0), 0.0)
        geo &= ok0 & (np.abs(r - r0) <= 0.5 * np.abs(r0))
    limit = np.where(geo, c + d2 * r / np.where(geo, 1.0 - r, 1.0), c)
    return limit, np.where(geo, AITKEN, LAST).astype(np.int8)


def _coarse_integrals(arr: np.ndarray, fine: Grid, coarse: Grid) -> np.ndarray:
    """Cell integrals over coarse cells of a fine array (grid axes last)."""
    k = fine.refinement_factor(coarse)
    return block_sum(arr, k, fine.dim) * fine.cell_volume


def _window_weights(times, window):
    times = np.asarray(times, dtype=float)
    if window is None:
        window = (times[0], times[-1])
    t0, t1 = window
    sel = (times >= t0 - 1e-12) & (times <= t1 + 1e-12)
    if sel.sum() == 0:
        raise ValueError("empty time window")
    if sel.sum() == 1:
        w = sel.astype(float)
    else:
        w = np.zeros_like(times)
        w[sel] = trapezoid_weights(times[sel])
    return w / w.sum()


def _time_average(arr: np.ndarray, w: np.ndarray) -> np.ndarray:
    return np.tensordot(w, arr, axes=(0, 0))


# --------------------------------------------------------------------------
# Weak limit
# --------------------------------------------------------------------------


def weak_limit_estimate(sequence: list, coarse: Grid, ratio_max: float = 0.9) -> SpaceTimeField:
    """Coarse-cell averages of each level extrapolated in the level index.

    ``meta["extrapolation"]`` holds the per-cell/per-time method codes
    (1 Aitken, 0 last level) for density and momentum.
    """
    if len(sequence) < 3:
        raise ValueError("cannot extrapolate from fewer than 3 levels")
    times = sequence[0].times
    vol = coarse.cell_volume
    rhos, ms, Ss = [], [], []
    for f in sequence:
        if len(f.times) != len(times) or np.any(f.times != times):
            raise ValueError("sequence members must share output times")
        rhos.append(_coarse_integrals(f.rho, f.grid, coarse) / vol)
        ms.append(_coarse_integrals(f.m, f.grid, coarse) / vol)
        if f.is_full:
            Ss.append(_coarse_integrals(f.S, f.grid, coarse) / vol)
    rho, code_r = extrapolate_levels(rhos, ratio_max)
    m, code_m = extrapolate_levels(ms, ratio_max)
    bad = rho < 0
    rho = np.where(bad, rhos[-1], rho)
    code_r = np.where(bad, LAST, code_r)
    S = None
    log = {"rho": code_r, "m": code_m}
    if Ss:
        S, code_s = extrapolate_levels(Ss, ratio_max)
        log["S"] = code_s
    meta = {
        "generator": "weak_limit",
        "extrapolation": log,
        "aitken_fraction": float(np.mean(np.concatenate([c.ravel() for c in log.values()]))),
    }
    return SpaceTimeField(coarse, times, rho, m, S, sequence[0].far, 0, meta)


# --------------------------------------------------------------------------
# Measure containers
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ScalarMeasureField:
    """Nonnegative cell weights on a coarse grid (weight = measure of the cell)."""

    grid: Grid
    weights: np.ndarray
    clip_mass: float = 0.0
    clip_count: int = 0

    @classmethod
    def from_values(cls, grid: Grid, values) -> "ScalarMeasureField":
        v = np.asarray(values, dtype=float)
        if v.shape != grid.cells:
            raise ValueError("weights do not match the grid")
        neg = v < 0
        return cls(grid, np.where(neg, 0.0, v), float(-v[neg].sum()), int(neg.sum()))

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarMeasureField":
        return cls(grid, np.zeros(grid.cells))

    @property
    def total(self) -> float:
        return float(self.weights.sum())


def _tri(d):
    return [(i, j) for i in range(d) for j in range(i, d)]


@dataclass(frozen=True, eq=False)
class MatrixMeasureField:
    """Symmetric ``d x d`` matrix per coarse cell; only the upper triangle is stored."""

    grid: Grid
    upper: np.ndarray  # (d(d+1)/2, *cells)

    @classmethod
    def from_full(cls, grid: Grid, mats, sym_tol: float = 1e-10) -> "MatrixMeasureField":
        M = np.asarray(mats, dtype=float)
        d = grid.dim
        if M.shape != (d, d) + grid.cells:
            raise ValueError("matrix field does not match the grid")
        asym = np.abs(M - np.swapaxes(M, 0, 1)).max(initial=0.0)
        if asym > sym_tol * max(np.abs(M).max(initial=0.0), 1.0):
            raise ValueError("matrix field is not symmetric")
        return cls(grid, np.stack([M[i, j] for i, j in _tri(d)]))

    @classmethod
    def zeros(cls, grid: Grid) -> "MatrixMeasureField":
        d = grid.dim
        return cls(grid, np.zeros((d * (d + 1) // 2,) + grid.cells))

    @classmethod
    def atom(cls, grid: Grid, cell, mat) -> "MatrixMeasureField":
        out = np.zeros((grid.dim, grid.dim) + grid.cells)
        out[(slice(None), slice(None)) + tuple(cell)] = np.asarray(mat, dtype=float)
        return cls.from_full(grid, out)

    @property
    def mats(self) -> np.ndarray:
        d = self.grid.dim
        M = np.empty((d, d) + self.grid.cells)
        for k, (i, j) in enumerate(_tri(d)):
            M[i, j] = self.upper[k]
            M[j, i] = self.upper[k]
        return M

    def cell_matrices(self) -> np.ndarray:
        """Shape ``(*cells, d, d)`` for batched linear algebra."""
        return np.moveaxis(np.moveaxis(self.mats, 0, -1), 0, -1)

    @property
    def trace(self) -> np.ndarray:
        M = self.mats
        return sum(M[i, i] for i in range(self.grid.dim))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.cell_matrices())

    @property
    def min_eig(self) -> np.ndarray:
        return self.eigenvalues()[..., 0]

    def total_variation(self) -> float:
        """Sum over cells of the operator norm."""
        ev = self.eigenvalues()
        return float(np.abs(ev).max(axis=-1).sum())

    def __add__(self, other: "MatrixMeasureField") -> "MatrixMeasureField":
        if other.grid != self.grid:
            raise ValueError("grid mismatch")
        return MatrixMeasureField(self.grid, self.upper + other.upper)

    def __sub__(self, other: "MatrixMeasureField") -> "MatrixMeasureField":
        return self + other.scaled(-1.0)

    def scaled(self, c: float) -> "MatrixMeasureField":
        return MatrixMeasureField(self.grid, c * self.upper)


def identity_times(grid: Grid, weights) -> MatrixMeasureField:
    d = grid.dim
    w = np.asarray(weights, dtype=float)
    return MatrixMeasureField(grid, np.stack([w if i == j else np.zeros_like(w) for i, j in _tri(d)]))


# --------------------------------------------------------------------------
# Per-level cell integrals against the limit
# --------------------------------------------------------------------------


def _limit_arrays(limit, k: int, member: SpaceTimeField):
    """Limit fields on ``member``'s grid: either a per-level list of targets
    or one coarse field prolonged to the member grid."""
    lim = limit[k] if isinstance(limit, (list, tuple)) else limit
    if lim.grid == member.grid:
        return lim.rho, lim.m
    return prolong(lim.rho, lim.grid, member.grid), prolong(lim.m, lim.grid, member.grid)


def _per_level(sequence, limit, coarse, density, window):
    """Time-averaged coarse integrals of ``density(member) - density(limit)``,
    stacked over levels."""
    out = []
    for k, f in enumerate(sequence):
        rho_l, m_l = _limit_arrays(limit, k, f)
        diff = density(f.rho, f.m) - density(rho_l, m_l)
        w = _window_weights(f.times, window)
        out.append(_coarse_integrals(_time_average(diff, w), f.grid, coarse))
    return np.stack(out)


def _far_u(sequence):
    far = sequence[0].far
    d = sequence[0].grid.dim
    return np.zeros(d) if far is None else np.asarray(far.u_inf, dtype=float)


def _corrected_tensor(u_inf, g):
    """``(m - rho u) (x) (m - rho u) / rho`` on stacked arrays ``(nt, d, ...)``."""
    def dens(rho, m):
        u = u_inf.reshape((1, -1) + (1,) * (m.ndim - 2))
        w = m - rho[:, None] * u
        vac = rho <= g.rho_vac
        safe = np.where(vac, 1.0, rho)
        C = w[:, :, None] * w[:, None, :] / safe[:, None, None]
        return np.where(vac[:, None, None], 0.0, C)
    return dens


@dataclass
class LevelDefects:
    """Raw (un-extrapolated) per-level defect integrals on the coarse grid."""

    R_e: np.ndarray       # (N, *cells)
    R_v: np.ndarray       # (N, d, d, *cells)
    energy: np.ndarray    # (N, *cells)


def level_defects(sequence, limit, coarse: Grid, g: GasParameters, window=None) -> LevelDefects:
    u_inf = _far_u(sequence)
    R_e = _per_level(sequence, limit, coarse, lambda r, m: pressure_potential(r, g), window)
    R_v = _per_level(sequence, limit, coarse, _corrected_tensor(u_inf, g), window)
    far = sequence[0].far

    def energy(rho, m):
        mv = np.moveaxis(m, 1, 0)
        if far is None:
            return relative_energy_isentropic_array(rho, mv, 0.0, np.zeros(len(mv)), g)
        return relative_energy_isentropic_array(rho, mv, far.rho_inf, np.asarray(far.m_inf), g)

    E = _per_level(sequence, limit, coarse, energy, window)
    return LevelDefects(R_e, R_v, E)


def _extrap(arr, ratio_max=0.9):
    if arr.shape[0] < 3:
        raise ValueError("cannot extrapolate from fewer than 3 levels")
    return extrapolate_levels(arr, ratio_max)


def internal_energy_defect(sequence, limit, coarse: Grid, g: GasParameters,
                           window=None) -> ScalarMeasureField:
    """Extrapolated ``int_cell P(rho_n) - P(rho)``, time-averaged, clipped at 0."""
    R = _per_level(sequence, limit, coarse, lambda r, m: pressure_potential(r, g), window)
    val, _ = _extrap(R)
    return ScalarMeasureField.from_values(coarse, val)


def viscosity_defect(sequence, limit, coarse: Grid, g: GasParameters,
                     window=None) -> MatrixMeasureField:
    """Extrapolated cell integrals of ``C_n - C`` with the far-field corrected
    convective tensor ``C = (m - rho u_inf) (x) (m - rho u_inf) / rho``."""
    R = _per_level(sequence, limit, coarse, _corrected_tensor(_far_u(sequence), g), window)
    val, _ = _extrap(R)
    val = 0.5 * (val + np.swapaxes(val, 0, 1))
    return MatrixMeasureField.from_full(coarse, val)


def total_defect(R_v: MatrixMeasureField, R_e: ScalarMeasureField, g: GasParameters) -> MatrixMeasureField:
    """``D = R_v + (gamma - 1) R_e I``."""
    if R_v.grid != R_e.grid:
        raise ValueError("grid mismatch between defect measures")
    return R_v + identity_times(R_v.grid, (g.gamma - 1.0) * R_e.weights)


@dataclass
class PSDReport:
    psd: bool
    min_eig: np.ndarray
    min_quadratic: np.ndarray
    tol: float
    worst: float
    worst_cell: tuple


def unit_battery(d: int, count: int = 24, seed: int = 0) -> np.ndarray:
    """The ``d`` axis vectors followed by ``count`` random unit vectors."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=(count, d))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return np.concatenate([np.eye(d), v])


def psd_check(M: MatrixMeasureField, xi_battery=None, tol: float | None = None) -> PSDReport:
    d = M.grid.dim
    xi = unit_battery(d) if xi_battery is None else np.asarray(xi_battery, dtype=float)
    A = M.cell_matrices()
    quad = np.einsum("ki,...ij,kj->...k", xi, A, xi).min(axis=-1)
    ev = np.linalg.eigvalsh(A)[..., 0]
    if tol is None:
        tol = 1e-8 * max(float(np.abs(M.trace).max(initial=0.0)), 1e-300)
    worst_cell = tuple(int(i) for i in np.unravel_index(np.argmin(ev), ev.shape))
    worst = float(ev.min())
    return PSDReport(bool(worst >= -tol), ev, quad, tol, worst, worst_cell)


@dataclass
class IdentityReport:
    gap: float
    relative_gap: float
    energy_defect: ScalarMeasureField
    passed: bool
    tol: float


def energy_defect_identity(sequence, limit, R_v: MatrixMeasureField, R_e: ScalarMeasureField,
                           g: GasParameters, coarse: Grid | None = None, window=None,
                           tol: float = 1e-6, floor: float = 1e-14) -> IdentityReport:
    """Compare the extrapolated relative-energy defect with ``tr(R_v)/2 + R_e``."""
    coarse = coarse or R_v.grid
    lv = level_defects(sequence, limit, coarse, g, window)
    ed, _ = _extrap(lv.energy)
    rhs = 0.5 * R_v.trace + R_e.weights
    gap = float(np.abs(ed - rhs).sum())
    scale = float(np.abs(ed).sum())
    rel = gap / (scale + floor)
    return IdentityReport(gap, rel, ScalarMeasureField.from_values(coarse, ed), rel < tol, tol)


@dataclass
class DefectReport:
    R_e: ScalarMeasureField
    R_v: MatrixMeasureField
    D: MatrixMeasureField
    energy_defect: ScalarMeasureField
    psd_min_eig: np.ndarray
    identity_gap: float
    identity_relative_gap: float
    level_mass: list = field(default_factory=list)
    level_energy: list = field(default_factory=list)

    @property
    def mass(self) -> float:
        return self.D.total_variation()


def defect_report(sequence, limit, coarse: Grid, g: GasParameters, window=None) -> DefectReport:
    """All defect measures of a sequence in one pass."""
    R_e = internal_energy_defect(sequence, limit, coarse, g, window)
    R_v = viscosity_defect(sequence, limit, coarse, g, window)
    D = total_defect(R_v, R_e, g)
    ident = energy_defect_identity(sequence, limit, R_v, R_e, g, coarse, window)
    lv = level_defects(sequence, limit, coarse, g, window)
    level_mass = []
    for k in range(lv.R_e.shape[0]):
        Rv = 0.5 * (lv.R_v[k] + np.swapaxes(lv.R_v[k], 0, 1))
        Dk = MatrixMeasureField.from_full(coarse, Rv) + identity_times(coarse, (g.gamma - 1.0) * lv.R_e[k])
        level_mass.append(Dk.total_variation())
    return DefectReport(R_e, R_v, D, ident.energy_defect, psd_check(R_v).min_eig,
                        ident.gap, ident.relative_gap, level_mass,
                        [float(np.abs(e).sum()) for e in lv.energy])
