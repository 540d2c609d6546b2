"""Divergence pairings of matrix measures and the Liouville-type checks:
a positive semidefinite, divergence-free, finite matrix measure vanishes.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .defects import MatrixMeasureField, ScalarMeasureField, psd_check, unit_battery
from .eos import GasParameters
from .grid import Grid, SupportError, TestFunction, cutoff, make_battery

VERDICT_OK = "theorem-consistent"
VERDICT_NOT_PSD = "PSD hypothesis violated - theorem inapplicable"
VERDICT_VIOLATION = "THEOREM VIOLATION - check quadrature"


def _support_box(grid: Grid, mode: str):
    return grid.extent if mode == "bounded" else grid.inner


def _check_support(tf: TestFunction, grid: Grid, mode: str):
    for (lo, hi), (slo, shi) in zip(_support_box(grid, mode), tf.space_factor.support):
        if slo <= lo or shi >= hi:
            raise SupportError("test function not compactly supported in domain")


def div_pairing(D: MatrixMeasureField, tf: TestFunction, mode: str = "whole_space") -> float:
    """``sum_c grad varphi(x_c) : D_c`` (cell weights already carry the volume).

    The gradient is the central-difference one of the weak pairings, so a
    constant cell field is exactly divergence free.
    """
    if tf.kind != "vector":
        raise ValueError("div pairing needs a vector test function")
    _check_support(tf, D.grid, mode)
    G = tf.sbp_vector_grad(D.grid)
    return float(np.sum(G * D.mats))


# --------------------------------------------------------------------------
# Cut-off extension of linear test functions
# --------------------------------------------------------------------------


@dataclass
class LinearExtension:
    xi: tuple
    ns: list
    values: list
    interior: list
    annulus_grad: list
    annulus_cutoff: list
    tail_mass: list
    bound_ratio: list
    limit: float


def linear_extension_pairing(D: MatrixMeasureField, xi, ns=(1, 2, 4, 8), center=None,
                             length: float | None = None, tail_tol: float = 1e-3) -> LinearExtension:
    """Pair ``D`` with ``psi_n(x) xi (xi . x)`` for growing ``n``.

    Each value splits into the interior part (where ``psi_n = 1``), the
    annulus part carrying ``psi_n xi (x) xi`` and the annulus part carrying
    ``(xi . x) xi (x) grad psi_n``.  ``bound_ratio`` is the sum of the two
    annulus parts divided by the mass outside radius ``n L`` (finite when
    the split is controlled by the tail).
    """
    grid = D.grid
    d = grid.dim
    xi = np.asarray(xi, dtype=float).ravel()
    xi = xi / np.linalg.norm(xi)
    if center is None:
        center = np.array([0.5 * (lo + hi) for lo, hi in grid.extent])
    center = np.asarray(center, dtype=float)
    if length is None:
        length = 0.25 * min(hi - lo for lo, hi in grid.inner)
    X = grid.centers()
    Y = X - center.reshape((d,) + (1,) * d)
    r = np.sqrt(np.sum(Y * Y, axis=0))
    M = D.mats
    xx = np.einsum("i,j,ij...->...", xi, xi, M)
    xdot = np.tensordot(xi, Y, axes=(0, 0))
    opn = np.abs(D.eigenvalues()).max(axis=-1)
    total = float(opn.sum())
    out = LinearExtension(tuple(xi), list(ns), [], [], [], [], [], [], 0.0)
    for n in ns:
        fam = cutoff("whole_space", n, {"center": tuple(center), "length": length})
        psi, gpsi = fam.evaluate(X)
        inner = r <= n * length
        ann = ~inner
        # grad varphi_ij = xi_i (psi xi_j + (xi . x) d_j psi)
        cut = np.einsum("i,j...,ij...->...", xi, xdot[None] * gpsi, M)
        interior = float(xx[inner].sum())
        a_grad = float((psi * xx)[ann].sum())
        a_cut = float(cut[ann].sum())
        tail = float(opn[ann].sum())
        out.values.append(interior + a_grad + a_cut)
        out.interior.append(interior)
        out.annulus_grad.append(a_grad)
        out.annulus_cutoff.append(a_cut)
        out.tail_mass.append(tail)
        annulus = abs(a_grad) + abs(a_cut)
        out.bound_ratio.append(annulus / tail if tail > 0 else (0.0 if annulus == 0 else np.inf))
    out.limit = out.values[-1]
    if total > 0 and out.tail_mass[-1] > tail_tol * total:
        warnings.warn("tail not negligible", RuntimeWarning, stacklevel=2)
    return out


# --------------------------------------------------------------------------
# Boundary trace ladder
# --------------------------------------------------------------------------


@dataclass
class BoundaryTraceReport:
    deltas: list
    values: list
    slope: float
    tol: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict in ("pass", "trend-pass")


def boundary_trace_check(D: MatrixMeasureField, deltas, box=None, tol: float | None = None) -> BoundaryTraceReport:
    """``delta -> (1/delta) * trace mass within delta of the boundary``.

    ``pass`` when every value is below ``tol``; ``trend-pass`` when the values
    decrease with ``delta`` at a log-log rate of at least 1/2 (a finite
    ladder can only show the trend of an o(delta) layer); ``fail`` otherwise.
    """
    grid = D.grid
    box = grid.extent if box is None else box
    deltas = sorted((float(x) for x in deltas), reverse=True)
    if min(deltas) < grid.h:
        raise ValueError("unresolvable layer: delta below the cell width")
    X = grid.centers()
    dist = np.full(grid.cells, np.inf)
    for k, (lo, hi) in enumerate(box):
        dist = np.minimum(dist, np.minimum(X[k] - lo, hi - X[k]))
    tr = D.trace
    vals = [float(tr[dist <= dl].sum()) / dl for dl in deltas]
    if tol is None:
        tol = 1e-8 * max(float(np.abs(tr).sum()), 1e-300)
    slope = float("nan")
    if len(deltas) >= 2 and all(v > 0 for v in vals):
        slope = float(np.polyfit(np.log(deltas), np.log(vals), 1)[0])
    if max(abs(v) for v in vals) <= tol:
        verdict = "pass"
    elif all(b < a for a, b in zip(vals, vals[1:])) and slope >= 0.5:
        verdict = "trend-pass"
    else:
        verdict = "fail"
    return BoundaryTraceReport(deltas, vals, slope, tol, verdict)


# --------------------------------------------------------------------------
# Verdict
# --------------------------------------------------------------------------


@dataclass
class LiouvilleVerdict:
    verdict: str
    psd: bool
    min_eig: float
    total_variation: float
    sup_div: float
    tol_div: float
    battery_norm: float
    linear_pairings: list
    divergence_free: bool
    boundary: BoundaryTraceReport | None = None
    tol_mass: float = 0.0


def liouville_verdict(D: MatrixMeasureField, mode: str = "whole_space", battery: list | None = None,
                      count: int = 64, seed: int = 0, tol_div_rel: float = 1e-6,
                      tol_mass: float = 1e-12, deltas=None, xi_count: int = 6) -> LiouvilleVerdict:
    """Check the hypotheses and conclusion of the Liouville statement on ``D``.

    ``divergence_free`` means every bump pairing and every cut-off linear
    pairing is below ``tol_div = tol_div_rel * ||D|| * max_battery ||varphi||_C1``.
    """
    grid = D.grid
    if battery is None:
        battery = make_battery(grid, count, seed, "vector")
    psd = psd_check(D)
    tv = D.total_variation()
    bnorm = max(tf.c1_norm() for tf in battery)
    tol_div = tol_div_rel * tv * bnorm
    sup_div = max(abs(div_pairing(D, tf, mode)) for tf in battery) if battery else 0.0
    lin = []
    if mode == "whole_space":
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            for xi in unit_battery(grid.dim, xi_count, seed):
                lin.append(linear_extension_pairing(D, xi).limit)
    sup_lin = max((abs(v) for v in lin), default=0.0)
    div_free = sup_div <= tol_div and sup_lin <= tol_div
    boundary = None
    hyp = div_free
    if mode == "bounded":
        if deltas is None:
            width = min(hi - lo for lo, hi in grid.extent)
            deltas = [x for x in (width / 4, width / 8, width / 16, width / 32) if x >= grid.h]
        boundary = boundary_trace_check(D, deltas)
        hyp = hyp and boundary.passed
    if tv <= tol_mass:
        verdict = VERDICT_OK
    elif not psd.psd:
        verdict = VERDICT_NOT_PSD
    elif hyp:
        verdict = VERDICT_VIOLATION
    else:
        verdict = VERDICT_OK
    return LiouvilleVerdict(verdict, psd.psd, psd.worst, tv, sup_div, tol_div, bnorm, lin,
                            div_free, boundary, tol_mass)


# --------------------------------------------------------------------------
# Divergence-free, indefinite counterexample
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class BumpPotential:
    """Separable ``A prod_i (1 - ((x_i - c_i)/r)^2)_+^p``; C^(p-1) for p >= 2."""

    center: tuple = (0.0, 0.0)
    radius: float = 0.5
    amplitude: float = 1.0
    power: int = 5

    def _q(self, s):
        inside = np.abs(s) < 1.0
        u = np.where(inside, 1.0 - s * s, 0.0)
        p = self.power
        q = u**p
        dq = np.where(inside, -2.0 * p * s * u ** (p - 1), 0.0)
        d2q = np.where(inside, -2.0 * p * u ** (p - 1) + 4.0 * p * (p - 1) * s * s * u ** max(p - 2, 0), 0.0)
        return q, dq / self.radius, d2q / self.radius**2

    def value(self, X):
        c = np.asarray(self.center).reshape((-1,) + (1,) * (np.ndim(X) - 1))
        qs = self._q((np.asarray(X) - c) / self.radius)[0]
        return self.amplitude * np.prod(qs, axis=0)

    def hessian(self, X):
        c = np.asarray(self.center).reshape((-1,) + (1,) * (np.ndim(X) - 1))
        q, dq, d2q = self._q((np.asarray(X) - c) / self.radius)
        d = q.shape[0]
        H = np.empty((d, d) + q.shape[1:])
        for i in range(d):
            for j in range(d):
                f = np.ones(q.shape[1:])
                for k in range(d):
                    if i == j == k:
                        f = f * d2q[k]
                    elif k in (i, j):
                        f = f * dq[k]
                    else:
                        f = f * q[k]
                H[i, j] = f
        return self.amplitude * H


def _fourth_difference_norm(potential, grid: Grid) -> float:
    """Max over both axes of ``|Delta^4 phi| / h^4`` on a grid."""
    h = grid.h
    vals = potential.value(grid.centers())
    out = 0.0
    for ax in range(grid.dim):
        d4 = np.diff(vals, n=4, axis=ax)
        out = max(out, float(np.abs(d4).max(initial=0.0)) / h**4)
    return out


def counterexample_field(potential, grid: Grid, check_smoothness: bool = True,
                         blowup_ratio: float = 2.5) -> MatrixMeasureField:
    """Cell measure of ``[[phi_yy, -phi_xy], [-phi_xy, phi_xx]]``.

    Each row is divergence free for any C^3 potential; the matrix is
    indefinite wherever ``det Hess(phi) < 0``.  The smoothness guard compares
    fourth differences at ``h`` and ``h/2``.
    """
    if grid.dim != 2:
        raise ValueError("the counterexample lives in two dimensions")
    if check_smoothness:
        a = _fourth_difference_norm(potential, grid)
        b = _fourth_difference_norm(potential, grid.refine(2))
        if a > 0 and b / a > blowup_ratio:
            raise ValueError("potential not smooth enough: fourth differences blow up")
    H = potential.hessian(grid.centers())
    D = np.empty_like(H)
    D[0, 0] = H[1, 1]
    D[1, 1] = H[0, 0]
    D[0, 1] = D[1, 0] = -H[0, 1]
    return MatrixMeasureField.from_full(grid, D * grid.cell_volume)


# --------------------------------------------------------------------------
# Momentum equation with defects
# --------------------------------------------------------------------------


@dataclass
class MomentumDefectReport:
    lhs: np.ndarray
    limit_residual: np.ndarray
    pairing: np.ndarray
    gap: np.ndarray
    scale: float
    relative_gap: float
    passed: bool
    tol: float


def defect_pairing(R_v: MatrixMeasureField, R_e: ScalarMeasureField, tf: TestFunction,
                   times, g: GasParameters) -> float:
    """``int psi dt * sum_c [grad varphi : R_v + (gamma-1) div varphi R_e]``
    for time-averaged (stationary) defect measures.

    The defects are known only as coarse-cell masses, treated as atoms at
    the centres, so the analytic gradient is evaluated there.
    """
    X = R_v.grid.centers()
    space = float(np.sum(tf.vector_grad(X) * R_v.mats) + (g.gamma - 1.0) * np.sum(tf.div(X) * R_e.weights))
    return float(np.sum(tf.time_weights(times))) * space


def momentum_defect_equation_check(limit, R_v: MatrixMeasureField, R_e: ScalarMeasureField,
                                   battery: list, g: GasParameters, sequence_limit=None,
                                   tol_s1: float = 0.05, floor: float = 1e-12) -> MomentumDefectReport:
    """Compare the limit of the sequence residuals with the limit's own residual
    plus the defect pairing, for every vector member of ``battery``.

    ``sequence_limit`` holds the extrapolated ``lim e2_n`` per battery member;
    when omitted it is taken as 0 (a consistent sequence), which gives the
    plain relation ``residual(limit) = -pairing``.
    """
    from .residuals import momentum_residual

    vec = [tf for tf in battery if tf.kind == "vector"]
    lim_res = np.array([momentum_residual(limit, tf, None, g) for tf in vec])
    pair = np.array([defect_pairing(R_v, R_e, tf, limit.times, g) for tf in vec])
    lhs = np.zeros(len(vec)) if sequence_limit is None else np.asarray(sequence_limit, dtype=float)
    gap = np.abs(lhs - (lim_res + pair))
    scale = max(float(np.abs(pair).max(initial=0.0)), float(np.abs(lim_res).max(initial=0.0)), floor)
    rel = float(gap.max(initial=0.0)) / scale
    return MomentumDefectReport(lhs, lim_res, pair, gap, scale, rel, rel < tol_s1, tol_s1)
