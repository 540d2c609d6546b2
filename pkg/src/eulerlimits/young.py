"""Empirical Young measures, Jensen gaps and the sharp Jensen trichotomy.

Phase points are flat arrays ``(rho, m_1, ..., m_d[, S])``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .eos import (
    INF,
    ExtendedReal,
    FullState,
    GasParameters,
    IsentropicState,
    total_energy_full,
    total_energy_isentropic,
)
from .grid import Grid, SpaceTimeField


class DichotomyViolation(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class AtomicMeasure:
    atoms: np.ndarray    # (k, p)
    weights: np.ndarray  # (k,)

    def __post_init__(self):
        atoms = np.atleast_2d(np.asarray(self.atoms, dtype=float))
        w = np.asarray(self.weights, dtype=float).ravel()
        if atoms.shape[0] != len(w):
            raise ValueError("one weight per atom")
        if np.any(w <= 0):
            raise ValueError("weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("weights must sum to 1")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", w)

    @classmethod
    def dirac(cls, y) -> "AtomicMeasure":
        return cls(np.atleast_2d(y), np.ones(1))

    def __len__(self):
        return len(self.weights)


def barycenter(nu: AtomicMeasure) -> np.ndarray:
    return nu.weights @ nu.atoms


def second_moment(nu: AtomicMeasure) -> float:
    """``<nu; |y - Y|^2>`` about the barycenter ``Y``."""
    dev = nu.atoms - barycenter(nu)
    return float(nu.weights @ np.sum(dev * dev, axis=1))


def full_energy(g: GasParameters) -> Callable:
    return lambda y: total_energy_full(FullState.from_array(y), g)


def isentropic_energy(g: GasParameters) -> Callable:
    return lambda y: total_energy_isentropic(IsentropicState.from_array(y), g)


def _ext(v) -> ExtendedReal:
    return v if isinstance(v, ExtendedReal) else ExtendedReal.of(v)


def jensen_gap(nu: AtomicMeasure, E: Callable, rtol: float = 1e-12) -> ExtendedReal:
    """``<nu; E> - E(<nu; y>)``; infinite when some atom has infinite energy.

    Negative round-off below ``rtol`` times the energy scale is reported as 0;
    a larger negative value means ``E`` is not convex and raises.
    """
    vals = [_ext(E(a)) for a in nu.atoms]
    if any(not v.is_finite for v in vals):
        return INF
    mean = float(np.dot(nu.weights, [v.value for v in vals]))
    eb = _ext(E(barycenter(nu)))
    if not eb.is_finite:
        raise ValueError("barycenter outside the energy domain")
    gap = mean - eb.value
    if gap < 0:
        if gap < -rtol * max(mean, eb.value, 1.0):
            raise ValueError("negative Jensen gap: functional is not convex")
        gap = 0.0
    return ExtendedReal(gap)


def sharp_jensen_classify(nu: AtomicMeasure, E: Callable, tol: float = 1e-10,
                          phase_tol: float = 1e-6) -> str:
    """``strict`` (gap > tol), ``dirac`` (second moment < phase_tol^2) or
    ``zero_set_supported`` (every atom has energy below tol).

    The tolerances should satisfy ``tol << curvature * phase_tol**2``.
    Anything else raises ``DichotomyViolation``.
    """
    gap = jensen_gap(nu, E)
    if gap > ExtendedReal(tol):
        return "strict"
    if second_moment(nu) < phase_tol**2:
        return "dirac"
    if all(_ext(E(a)) < ExtendedReal(tol) for a in nu.atoms):
        return "zero_set_supported"
    raise DichotomyViolation("dichotomy violation: small gap without Dirac or zero-set support")


def entropy_line_check(nu, s_lower: float, rtol: float = 1e-12) -> bool:
    """Barycenter above the line ``S = rho * s_lower`` (accepts a measure or a point)."""
    y = barycenter(nu) if isinstance(nu, AtomicMeasure) else np.asarray(nu, dtype=float)
    rho, S = y[0], y[-1]
    return bool(S - rho * s_lower >= -rtol * max(abs(S), abs(rho * s_lower), 1.0))


# --------------------------------------------------------------------------
# Empirical Young measures
# --------------------------------------------------------------------------


def phase_array(f: SpaceTimeField) -> np.ndarray:
    """Stacked phase variables, shape ``(nt, p, *cells)``."""
    parts = [f.rho[:, None], f.m]
    if f.is_full:
        parts.append(f.S[:, None])
    return np.concatenate(parts, axis=1)


def merge_atoms(samples: np.ndarray, tol: float) -> AtomicMeasure:
    """Uniform measure on ``samples`` with atoms closer than ``tol`` merged.

    Merged atoms sit at the mean of their group, so the barycenter is
    unchanged.
    """
    n = samples.shape[0]
    if tol > 0:
        keys = np.round(samples / tol).astype(np.int64)
        _, first, inv, counts = np.unique(keys, axis=0, return_index=True, return_inverse=True,
                                          return_counts=True)
        inv = inv.ravel()
        # mean as representative plus mean deviation, exact for identical samples
        rep = samples[first]
        dev = np.zeros((len(counts), samples.shape[1]))
        np.add.at(dev, inv, samples - rep[inv])
        atoms = rep + dev / counts[:, None]
        w = counts / n
    else:
        atoms, w = samples, np.full(n, 1.0 / n)
    w = w / w.sum()
    return AtomicMeasure(atoms, w)


@dataclass(frozen=True, eq=False)
class EmpiricalYoungMeasure:
    grid: Grid
    measures: list          # flat, C order over the coarse cells
    window: tuple
    merge_tol: float = 0.0
    meta: dict = field(default_factory=dict)

    def cell(self, index) -> AtomicMeasure:
        return self.measures[int(np.ravel_multi_index(tuple(index), self.grid.cells))]

    def barycenters(self) -> np.ndarray:
        """Shape ``(p, *cells)``."""
        B = np.stack([barycenter(nu) for nu in self.measures], axis=-1)
        return B.reshape((B.shape[0],) + self.grid.cells)


def empirical_young(f: SpaceTimeField, coarse: Grid, window=None, merge_rtol: float = 1e-9) -> EmpiricalYoungMeasure:
    """Per coarse cell, the uniform measure on the fine-cell phase values
    inside it over the time window ``[t0, t1]``."""
    times = f.times
    if window is None:
        window = (times[0], times[-1])
    t0, t1 = window
    sel = np.nonzero((times >= t0 - 1e-12) & (times <= t1 + 1e-12))[0]
    if len(sel) == 0:
        raise ValueError("empty time window")
    k = f.grid.refinement_factor(coarse)
    Y = phase_array(f)[sel]                      # (nt, p, *cells)
    nt, p = Y.shape[:2]
    d = f.grid.dim
    shape = [nt, p]
    for c in coarse.cells:
        shape += [c, k]
    Y = Y.reshape(shape)
    # -> (coarse cells..., nt, k..., p)
    cell_axes = [2 + 2 * i for i in range(d)]
    sub_axes = [3 + 2 * i for i in range(d)]
    Y = np.transpose(Y, cell_axes + [0] + sub_axes + [1])
    Y = Y.reshape(int(np.prod(coarse.cells)), -1, p)
    scale = max(float(np.abs(Y).max(initial=0.0)), 1e-300)
    tol = merge_rtol * scale
    measures = [merge_atoms(Y[c], tol) for c in range(Y.shape[0])]
    return EmpiricalYoungMeasure(coarse, measures, (float(t0), float(t1)), tol, {"level": f.level})


@dataclass
class JensenCellReport:
    classes: np.ndarray
    gaps: np.ndarray
    entropy_line: np.ndarray | None
    counts: dict


def classify_young(ym: EmpiricalYoungMeasure, E: Callable, tol: float = 1e-10,
                   phase_tol: float | None = None, s_lower: float | None = None) -> JensenCellReport:
    """Sharp Jensen class, gap and (optionally) entropy-line flag of every cell."""
    if phase_tol is None:
        phase_tol = max(1e-6, 10 * ym.merge_tol)
    classes, gaps, line = [], [], []
    for nu in ym.measures:
        classes.append(sharp_jensen_classify(nu, E, tol, phase_tol))
        gp = jensen_gap(nu, E)
        gaps.append(gp.value if gp.is_finite else np.inf)
        if s_lower is not None:
            line.append(entropy_line_check(nu, s_lower))
    classes = np.array(classes).reshape(ym.grid.cells)
    counts = {c: int(np.sum(classes == c)) for c in ("strict", "dirac", "zero_set_supported")}
    return JensenCellReport(classes, np.array(gaps).reshape(ym.grid.cells),
                            None if s_lower is None else np.array(line).reshape(ym.grid.cells), counts)
