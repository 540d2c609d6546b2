"""Uniform grids, discrete space-time fields, quadrature and test functions.

Fields are cell-centred.  Space integrals use the midpoint rule.  Time
pairings with a test function integrate the piecewise-linear interpolant of
the samples against psi exactly; plain time integrals use the trapezoid
rule.  Weak pairings take central-difference derivatives of the test
function on the grid, so constant fields pair to zero.  Test functions are
separable quartic bumps ``prod_i (1 - ((x_i - c_i)/r_i)^2)^2`` which are C^1
with closed-form gradients.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .eos import FarField

BOUNDARY_MODES = ("far_field_padded", "bounded_domain")


class SupportError(ValueError):
    pass


# --------------------------------------------------------------------------
# Grid
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred grid on a box.

    ``pad`` is the width of the far-field padding layer; test functions and
    defect estimates live in the inner box ``extent`` shrunk by ``pad``.
    """

    cells: tuple
    extent: tuple
    boundary_mode: str = "far_field_padded"
    pad: float = 0.0

    def __post_init__(self):
        cells = tuple(int(c) for c in np.atleast_1d(self.cells))
        ext = np.asarray(self.extent, dtype=float).reshape(-1, 2)
        if len(cells) != len(ext):
            raise ValueError("cells and extent disagree on the dimension")
        if len(cells) not in (1, 2):
            raise ValueError("only d = 1 or d = 2 grids are supported")
        if min(cells) < 2:
            raise ValueError("need at least 2 cells per axis")
        widths = (ext[:, 1] - ext[:, 0]) / np.asarray(cells)
        if np.any(widths <= 0):
            raise ValueError("extent must be increasing")
        if not np.allclose(widths, widths[0], rtol=1e-12, atol=0):
            raise ValueError("cell width must be identical on every axis")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ValueError(f"unknown boundary mode {self.boundary_mode!r}")
        if self.pad < 0 or 2 * self.pad >= float((ext[:, 1] - ext[:, 0]).min()):
            raise ValueError("padding must leave a nonempty inner box")
        object.__setattr__(self, "cells", cells)
        object.__setattr__(self, "extent", tuple((float(a), float(b)) for a, b in ext))

    @property
    def dim(self) -> int:
        return len(self.cells)

    @property
    def h(self) -> float:
        lo, hi = self.extent[0]
        return (hi - lo) / self.cells[0]

    @property
    def cell_volume(self) -> float:
        return self.h**self.dim

    @property
    def size(self) -> int:
        return int(np.prod(self.cells))

    @property
    def inner(self) -> tuple:
        return tuple((lo + self.pad, hi - self.pad) for lo, hi in self.extent)

    def axis_centers(self, axis: int) -> np.ndarray:
        lo, _ = self.extent[axis]
        return lo + (np.arange(self.cells[axis]) + 0.5) * self.h

    def centers(self) -> np.ndarray:
        """Cell centres, shape ``(d, *cells)``."""
        axes = [self.axis_centers(k) for k in range(self.dim)]
        return np.stack(np.meshgrid(*axes, indexing="ij"))

    def refine(self, factor: int) -> "Grid":
        return Grid(tuple(c * factor for c in self.cells), self.extent, self.boundary_mode, self.pad)

    def coarsen(self, factor: int) -> "Grid":
        if any(c % factor for c in self.cells):
            raise ValueError("coarsening factor must divide the cell counts")
        return Grid(tuple(c // factor for c in self.cells), self.extent, self.boundary_mode, self.pad)

    def refinement_factor(self, coarse: "Grid") -> int:
        """Integer ``k`` with ``self.cells == k * coarse.cells`` on the same box."""
        if coarse.dim != self.dim or not np.allclose(coarse.extent, self.extent):
            raise ValueError("grids do not cover the same box")
        ratios = {c_f / c_c for c_f, c_c in zip(self.cells, coarse.cells)}
        if len(ratios) != 1:
            raise ValueError("non-uniform refinement")
        k = ratios.pop()
        if k < 1 or k != int(k):
            raise ValueError("fine grid does not refine the coarse grid")
        return int(k)

    def inner_mask(self) -> np.ndarray:
        X = self.centers()
        mask = np.ones(self.cells, dtype=bool)
        for k, (lo, hi) in enumerate(self.inner):
            mask &= (X[k] > lo) & (X[k] < hi)
        return mask


def block_sum(arr: np.ndarray, factor: int, dim: int) -> np.ndarray:
    """Sum over ``factor``-blocks of the trailing ``dim`` axes."""
    if factor == 1:
        return np.array(arr, dtype=float, copy=True)
    lead = arr.shape[: arr.ndim - dim]
    shape = list(lead)
    for n in arr.shape[arr.ndim - dim:]:
        shape += [n // factor, factor]
    out = arr.reshape(shape)
    axes = tuple(len(lead) + 2 * k + 1 for k in range(dim))
    return out.sum(axis=axes)


def restrict(arr: np.ndarray, fine: Grid, coarse: Grid) -> np.ndarray:
    """Cell averages of a fine-grid array on a coarse grid."""
    k = fine.refinement_factor(coarse)
    return block_sum(arr, k, fine.dim) / k**fine.dim


def prolong(arr: np.ndarray, coarse: Grid, fine: Grid) -> np.ndarray:
    """Piecewise-constant injection of a coarse array onto a fine grid."""
    k = fine.refinement_factor(coarse)
    out = arr
    for ax in range(arr.ndim - coarse.dim, arr.ndim):
        out = np.repeat(out, k, axis=ax)
    return out


# --------------------------------------------------------------------------
# Fields
# --------------------------------------------------------------------------


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Snapshot:
    grid: Grid
    rho: np.ndarray
    m: np.ndarray
    S: np.ndarray | None = None

    def __post_init__(self):
        rho, m = _frozen(self.rho), _frozen(self.m)
        if rho.shape != self.grid.cells:
            raise ValueError("density array does not match the grid")
        if m.shape != (self.grid.dim,) + self.grid.cells:
            raise ValueError("momentum array does not match the grid")
        if np.any(rho < 0):
            raise ValueError("negative density in snapshot")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "m", m)
        if self.S is not None:
            S = _frozen(self.S)
            if S.shape != self.grid.cells:
                raise ValueError("entropy array does not match the grid")
            object.__setattr__(self, "S", S)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """One member of an approximation sequence.

    Arrays are stacked in time: ``rho`` has shape ``(nt, *cells)``, ``m``
    ``(nt, d, *cells)`` and the optional ``S`` ``(nt, *cells)``.
    """

    grid: Grid
    times: np.ndarray
    rho: np.ndarray
    m: np.ndarray
    S: np.ndarray | None = None
    far: FarField | None = None
    level: int = 0
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        times = _frozen(self.times)
        if times.ndim != 1 or len(times) < 1:
            raise ValueError("times must be a nonempty 1-D array")
        if times[0] != 0.0:
            raise ValueError("times must start at 0")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        nt = len(times)
        rho, m = _frozen(self.rho), _frozen(self.m)
        if rho.shape != (nt,) + self.grid.cells:
            raise ValueError(f"density shape {rho.shape} does not match grid/times")
        if m.shape != (nt, self.grid.dim) + self.grid.cells:
            raise ValueError(f"momentum shape {m.shape} does not match grid/times")
        if np.any(rho < 0):
            raise ValueError("negative density in field")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "m", m)
        if self.S is not None:
            S = _frozen(self.S)
            if S.shape != rho.shape:
                raise ValueError("entropy shape does not match density")
            object.__setattr__(self, "S", S)
        if self.far is not None and self.far.dim != self.grid.dim:
            raise ValueError("far-field dimension does not match the grid")

    @property
    def T(self) -> float:
        return float(self.times[-1])

    @property
    def nt(self) -> int:
        return len(self.times)

    @property
    def is_full(self) -> bool:
        return self.S is not None

    def snapshot(self, k: int) -> Snapshot:
        return Snapshot(self.grid, self.rho[k], self.m[k], None if self.S is None else self.S[k])

    @property
    def snapshots(self) -> list:
        return [self.snapshot(k) for k in range(self.nt)]

    def replace(self, **kw) -> "SpaceTimeField":
        args = dict(grid=self.grid, times=self.times, rho=self.rho, m=self.m, S=self.S,
                    far=self.far, level=self.level, meta=dict(self.meta))
        args.update(kw)
        return SpaceTimeField(**args)


def constant_field(grid: Grid, times, rho: float, m, S: float | None = None,
                   far: FarField | None = None, level: int = 0) -> SpaceTimeField:
    times = np.asarray(times, dtype=float)
    nt = len(times)
    m = np.asarray(m, dtype=float).reshape(grid.dim, *([1] * grid.dim))
    return SpaceTimeField(
        grid,
        times,
        np.full((nt,) + grid.cells, float(rho)),
        np.broadcast_to(m, (nt, grid.dim) + grid.cells),
        None if S is None else np.full((nt,) + grid.cells, float(S)),
        far,
        level,
    )


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    times = np.asarray(times, dtype=float)
    w = np.zeros_like(times)
    if len(times) == 1:
        return w
    dt = np.diff(times)
    w[:-1] += 0.5 * dt
    w[1:] += 0.5 * dt
    return w


_GAUSS_X, _GAUSS_W = np.polynomial.legendre.leggauss(4)


def product_time_weights(times: np.ndarray, fn, breaks=()) -> np.ndarray:
    """Weights ``W_k = int hat_k(t) fn(t) dt`` for the piecewise-linear
    interpolant through ``times``.

    Each interval is split at ``breaks`` and integrated with 4-point
    Gauss-Legendre, which is exact when ``fn`` is a polynomial of degree <= 6
    on every piece (the quartic time bumps and their derivatives).
    """
    times = np.asarray(times, dtype=float)
    W = np.zeros_like(times)
    if len(times) < 2:
        return W
    br = np.asarray(breaks, dtype=float)
    pts = np.union1d(times, br[(br > times[0]) & (br < times[-1])])
    lo, hi = pts[:-1], pts[1:]
    k = np.clip(np.searchsorted(times, lo, side="right") - 1, 0, len(times) - 2)
    t = 0.5 * (hi + lo)[:, None] + 0.5 * (hi - lo)[:, None] * _GAUSS_X
    q = 0.5 * (hi - lo)[:, None] * _GAUSS_W * fn(t)
    lam = (t - times[k][:, None]) / (times[k + 1] - times[k])[:, None]
    np.add.at(W, k, np.sum(q * (1.0 - lam), axis=1))
    np.add.at(W, k + 1, np.sum(q * lam, axis=1))
    return W


def integrate_space(snap, integrand) -> float:
    """Midpoint rule ``sum f(x_c) h^d`` for a cellwise integrand."""
    grid = snap.grid if hasattr(snap, "grid") else snap
    f = np.asarray(integrand, dtype=float)
    if np.any(np.isnan(f)):
        raise ValueError("NaN in integrand")
    if f.shape[-grid.dim:] != grid.cells:
        raise ValueError("integrand does not match the grid")
    total = f.sum(axis=tuple(range(f.ndim - grid.dim, f.ndim))) * grid.cell_volume
    return float(total) if f.ndim == grid.dim else total


# --------------------------------------------------------------------------
# Test functions
# --------------------------------------------------------------------------


def _quartic(s):
    inside = np.abs(s) < 1.0
    q = np.where(inside, 1.0 - s * s, 0.0)
    return q * q, np.where(inside, -4.0 * s * q, 0.0)


@dataclass(frozen=True)
class TimeBump:
    """``psi(t) = (1 - ((t - c)/r)^2)^2`` on ``|t - c| < r``."""

    center: float
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("time bump radius must be positive")

    @property
    def support(self) -> tuple:
        return (self.center - self.radius, self.center + self.radius)

    def psi(self, t):
        return _quartic((np.asarray(t, dtype=float) - self.center) / self.radius)[0]

    def dpsi(self, t):
        return _quartic((np.asarray(t, dtype=float) - self.center) / self.radius)[1] / self.radius


@dataclass(frozen=True)
class SpaceBump:
    """Separable quartic bump with per-axis radii."""

    center: tuple
    radius: tuple

    def __post_init__(self):
        c = tuple(float(x) for x in np.atleast_1d(self.center))
        r = tuple(float(x) for x in np.atleast_1d(self.radius))
        if len(r) == 1 and len(c) > 1:
            r = r * len(c)
        if len(c) != len(r) or min(r) <= 0:
            raise ValueError("bad bump centre/radius")
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "radius", r)

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def support(self) -> tuple:
        return tuple((c - r, c + r) for c, r in zip(self.center, self.radius))

    def _factors(self, X):
        X = np.asarray(X, dtype=float)
        vals, ders = [], []
        for k in range(self.dim):
            v, d = _quartic((X[k] - self.center[k]) / self.radius[k])
            vals.append(v)
            ders.append(d / self.radius[k])
        return vals, ders

    def value(self, X):
        """``X`` has the coordinate axis first: shape ``(d, ...)``."""
        vals, _ = self._factors(X)
        return np.prod(vals, axis=0)

    def grad(self, X):
        vals, ders = self._factors(X)
        out = []
        for k in range(self.dim):
            g = ders[k]
            for j in range(self.dim):
                if j != k:
                    g = g * vals[j]
            out.append(g)
        return np.stack(out)


@dataclass(frozen=True)
class TestFunction:
    """Separable space-time test function ``psi(t) phi(x)`` (times a fixed
    unit ``direction`` for vector-valued kinds).

    ``time_factor=None`` stands for a purely spatial function.
    """

    space_factor: SpaceBump
    time_factor: TimeBump | None = None
    direction: tuple | None = None

    __test__ = False  # not a pytest class

    def __post_init__(self):
        if self.direction is not None:
            d = np.asarray(self.direction, dtype=float).ravel()
            if len(d) != self.space_factor.dim:
                raise ValueError("direction dimension mismatch")
            n = np.linalg.norm(d)
            if n == 0:
                raise ValueError("zero direction")
            object.__setattr__(self, "direction", tuple(d / n))

    @property
    def kind(self) -> str:
        return "scalar" if self.direction is None else "vector"

    @property
    def dim(self) -> int:
        return self.space_factor.dim

    def psi(self, t):
        return np.ones_like(np.asarray(t, dtype=float)) if self.time_factor is None else self.time_factor.psi(t)

    def dpsi(self, t):
        return np.zeros_like(np.asarray(t, dtype=float)) if self.time_factor is None else self.time_factor.dpsi(t)

    def time_weights(self, times, derivative: bool = False) -> np.ndarray:
        """Exact weights for ``int F psi dt`` (or ``psi'``) with ``F`` linear
        between samples."""
        fn = self.dpsi if derivative else self.psi
        breaks = () if self.time_factor is None else self.time_factor.support
        return product_time_weights(times, fn, breaks)

    def phi(self, X):
        return self.space_factor.value(X)

    def grad_phi(self, X):
        return self.space_factor.grad(X)

    def vector_value(self, X):
        e = np.asarray(self.direction).reshape((-1,) + (1,) * (np.ndim(X) - 1))
        return e * self.phi(X)

    def vector_grad(self, X):
        """``d phi_i / d x_j`` with shape ``(d, d, ...)``."""
        e = np.asarray(self.direction).reshape((-1, 1) + (1,) * (np.ndim(X) - 1))
        return e * self.grad_phi(X)[None]

    def div(self, X):
        e = np.asarray(self.direction).reshape((-1,) + (1,) * (np.ndim(X) - 1))
        return np.sum(e * self.grad_phi(X), axis=0)

    def sbp_grad_phi(self, grid: "Grid") -> np.ndarray:
        """Central-difference gradient of ``phi`` sampled at the cell centres
        of ``grid``, shape ``(d, *cells)``.

        Sums of a constant field against it telescope to exactly zero, so
        pairings see constants as weak solutions to round-off; the
        truncation error against the analytic gradient is O(h^2).
        """
        return sbp_gradient(self.phi(grid.centers()), grid)

    def sbp_vector_grad(self, grid: "Grid") -> np.ndarray:
        G = self.sbp_grad_phi(grid)
        e = np.asarray(self.direction).reshape((-1, 1) + (1,) * grid.dim)
        return e * G[None]

    def sbp_div(self, grid: "Grid") -> np.ndarray:
        G = self.sbp_grad_phi(grid)
        e = np.asarray(self.direction).reshape((-1,) + (1,) * grid.dim)
        return np.sum(e * G, axis=0)

    def c1_norm(self) -> float:
        """``sup|phi| + sup|grad phi|`` (times ``sup|psi| = 1``)."""
        return 1.0 + sum(
            (8.0 / (3.0 * math.sqrt(3.0)) / r) ** 2 for r in self.space_factor.radius
        ) ** 0.5


def sbp_gradient(values: np.ndarray, grid: Grid) -> np.ndarray:
    """Central differences with zero values outside the grid."""
    out = []
    for ax in range(grid.dim):
        pad = [(0, 0)] * grid.dim
        pad[ax] = (1, 1)
        v = np.pad(values, pad)
        hi = [slice(None)] * grid.dim
        lo = [slice(None)] * grid.dim
        hi[ax], lo[ax] = slice(2, None), slice(0, -2)
        out.append((v[tuple(hi)] - v[tuple(lo)]) / (2.0 * grid.h))
    return np.stack(out)


def make_bump(center, radius, kind: str = "scalar", direction=None,
              time_center: float | None = None, time_radius: float | None = None,
              grid: Grid | None = None) -> TestFunction:
    """Quartic bump test function; ``grid`` enables the interior check."""
    sb = SpaceBump(center, radius)
    if grid is not None:
        _check_space_support(sb, grid)
    tb = None if time_center is None else TimeBump(time_center, time_radius)
    if kind == "vector":
        if direction is None:
            direction = (1.0,) + (0.0,) * (sb.dim - 1)
        return TestFunction(sb, tb, tuple(direction))
    if kind != "scalar":
        raise ValueError(f"unknown test-function kind {kind!r}")
    return TestFunction(sb, tb, None)


def make_battery(grid: Grid, count: int, seed: int, kind: str = "scalar",
                 T: float | None = None, radius_range=(0.08, 0.3),
                 time_radius_range=(0.2, 0.45)) -> list:
    """Deterministic pseudo-random bumps covering the inner box.

    Radii are fractions of the inner-box width; time supports (when ``T`` is
    given) are fractions of ``T`` and stay strictly inside ``(0, T)``.
    """
    rng = np.random.default_rng(seed)
    inner = np.asarray(grid.inner)
    width = float((inner[:, 1] - inner[:, 0]).min())
    out = []
    for _ in range(count):
        r = rng.uniform(*radius_range) * width
        lo = inner[:, 0] + r * 1.0001
        hi = inner[:, 1] - r * 1.0001
        c = rng.uniform(lo, hi)
        tc = tr = None
        if T is not None:
            tr = rng.uniform(*time_radius_range) * T
            tc = rng.uniform(tr * 1.0001, T - tr * 1.0001)
        direction = None
        if kind == "vector":
            v = rng.normal(size=grid.dim)
            direction = tuple(v / np.linalg.norm(v))
        out.append(make_bump(tuple(c), r, kind, direction, tc, tr, grid))
    return out


def _check_space_support(sb: SpaceBump, grid: Grid):
    for (lo, hi), (slo, shi) in zip(grid.inner, sb.support):
        if slo <= lo or shi >= hi:
            raise SupportError("test function not compactly supported in domain")


def check_support(tf: TestFunction, grid: Grid, t0: float = 0.0, tau: float | None = None):
    _check_space_support(tf.space_factor, grid)
    if tf.time_factor is not None and tau is not None:
        a, b = tf.time_factor.support
        if a < t0 or b > tau:
            raise SupportError("test function not compactly supported in (0, tau)")


# --------------------------------------------------------------------------
# Weak pairings
# --------------------------------------------------------------------------

CONTRACTIONS = ("scalar", "scalar_dt", "vector_grad", "vector_dt", "matrix_grad", "scalar_div")


def _time_slice(times, tau):
    if tau is None:
        return slice(None)
    n = int(np.searchsorted(times, tau, side="right"))
    if n < 2:
        raise ValueError("tau leaves fewer than two time samples")
    return slice(0, n)


def weak_pairing(field: SpaceTimeField, tf: TestFunction, contraction: str,
                 integrand: np.ndarray, tau: float | None = None) -> float:
    """Space-time integral of ``integrand`` against ``tf``.

    ``contraction`` selects the pairing:

    - ``scalar``:      F psi phi
    - ``scalar_dt``:   F psi' phi
    - ``vector_grad``: psi F . grad phi          (F has shape (nt, d, ...))
    - ``vector_dt``:   psi' F . varphi           (vector test function)
    - ``matrix_grad``: psi F : grad varphi       (F has shape (nt, d, d, ...))
    - ``scalar_div``:  psi F div varphi

    Spatial derivatives of the test function are taken by central
    differences on the grid (see ``TestFunction.sbp_grad_phi``).
    """
    if contraction not in CONTRACTIONS:
        raise ValueError(f"unknown contraction {contraction!r}")
    grid = field.grid
    check_support(tf, grid, field.times[0], field.T if tau is None else tau)
    sl = _time_slice(field.times, tau)
    times = field.times[sl]
    F = np.asarray(integrand, dtype=float)[sl]
    X = grid.centers()
    spatial_axes = tuple(range(F.ndim - grid.dim, F.ndim))
    if contraction in ("scalar", "scalar_dt"):
        space = (F * tf.phi(X)).sum(axis=spatial_axes)
        tfac = tf.time_weights(times, derivative=contraction == "scalar_dt")
    elif contraction == "vector_grad":
        space = (F * tf.sbp_grad_phi(grid)).sum(axis=(1,) + spatial_axes)
        tfac = tf.time_weights(times)
    elif contraction == "vector_dt":
        space = (F * tf.vector_value(X)).sum(axis=(1,) + spatial_axes)
        tfac = tf.time_weights(times, derivative=True)
    elif contraction == "matrix_grad":
        space = (F * tf.sbp_vector_grad(grid)).sum(axis=(1, 2) + spatial_axes)
        tfac = tf.time_weights(times)
    else:
        space = (F * tf.sbp_div(grid)).sum(axis=spatial_axes)
        tfac = tf.time_weights(times)
    return float(np.sum(tfac * space) * grid.cell_volume)


# --------------------------------------------------------------------------
# Cut-off families
# --------------------------------------------------------------------------


def _smoothstep(t):
    t = np.clip(t, 0.0, 1.0)
    return t * t * (3.0 - 2.0 * t), 6.0 * t * (1.0 - t)


@dataclass(frozen=True)
class CutoffFamily:
    """C^1 cut-off ``psi_n`` with its gradient.

    ``whole_space``: 1 on ``|x - c| <= n L``, 0 on ``|x - c| >= 2 n L``.
    ``boundary_layer``: on the box ``geometry``, a product of 1-D profiles
    vanishing within ``1/(3n)`` of each face and equal to 1 beyond ``1/n``.
    """

    mode: str
    n: int
    center: tuple = (0.0,)
    length: float = 1.0
    box: tuple = ((0.0, 1.0),)
    grad_ratio: float = field(default=0.0, compare=False)

    def __call__(self, X):
        return self.evaluate(X)[0]

    def evaluate(self, X):
        X = np.asarray(X, dtype=float)
        if self.mode == "whole_space":
            c = np.asarray(self.center).reshape((-1,) + (1,) * (X.ndim - 1))
            diff = X - c
            r = np.sqrt(np.sum(diff * diff, axis=0))
            R = self.n * self.length
            s, ds = _smoothstep((r - R) / R)
            psi = 1.0 - s
            safe = np.where(r > 0, r, 1.0)
            grad = -(ds / R) * diff / safe
            return psi, grad
        lo_t = 1.0 / (3.0 * self.n)
        hi_t = 1.0 / self.n
        vals, ders = [], []
        for k, (lo, hi) in enumerate(self.box):
            dlo = X[k] - lo
            dhi = hi - X[k]
            dist = np.minimum(dlo, dhi)
            sign = np.where(dlo <= dhi, 1.0, -1.0)
            s, ds = _smoothstep((dist - lo_t) / (hi_t - lo_t))
            vals.append(s)
            ders.append(sign * ds / (hi_t - lo_t))
        psi = np.prod(vals, axis=0)
        grad = []
        for k in range(len(self.box)):
            g = ders[k]
            for j in range(len(self.box)):
                if j != k:
                    g = g * vals[j]
            grad.append(g)
        return psi, np.stack(grad)


def cutoff(mode: str, n: int, geometry=None, samples: int = 4001) -> CutoffFamily:
    """Build the ``n``-th cut-off and measure its gradient bound.

    ``grad_ratio`` is ``sup|grad psi_n| * n * L`` (whole space) or
    ``sup|grad psi_n| / n`` (boundary layer), measured by dense sampling.
    """
    if n < 1:
        raise ValueError("cut-off index must be >= 1")
    geometry = dict(geometry or {})
    if mode == "whole_space":
        center = tuple(np.atleast_1d(geometry.get("center", (0.0,))).astype(float))
        length = float(geometry.get("length", 1.0))
        fam = CutoffFamily(mode, n, center=center, length=length)
        d = len(center)
        r = np.linspace(0.0, 2.5 * n * length, samples)
        X = np.zeros((d, samples)) + np.asarray(center)[:, None]
        X[0] += r
        _, g = fam.evaluate(X)
        ratio = float(np.sqrt((g * g).sum(axis=0)).max()) * n * length
    elif mode == "boundary_layer":
        box = tuple(tuple(map(float, b)) for b in geometry.get("box", ((0.0, 1.0),)))
        fam = CutoffFamily(mode, n, box=box)
        d = len(box)
        per_axis = samples if d == 1 else 401
        axes = [np.linspace(lo, hi, per_axis) for lo, hi in box]
        X = np.stack(np.meshgrid(*axes, indexing="ij"))
        _, g = fam.evaluate(X)
        ratio = float(np.sqrt((g * g).sum(axis=0)).max()) / n
    else:
        raise ValueError(f"unknown cut-off mode {mode!r}")
    object.__setattr__(fam, "grad_ratio", ratio)
    return fam
