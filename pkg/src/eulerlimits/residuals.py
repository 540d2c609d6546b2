"""Weak-form residuals, renormalized entropy inequality, energy inequality,
stability and consistency reports.

Sign conventions: ``continuity_residual`` and ``momentum_residual`` return
the space-time integrals of the weak formulations themselves, which vanish
for exact weak solutions.  ``entropy_residual`` returns the defect of the
renormalized entropy inequality, which is nonnegative for admissible
fields.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .eos import (
    GasParameters,
    convective_tensor_array,
    internal_energy_array,
    pressure_isentropic,
    relative_energy_isentropic_array,
    total_energy_full_array,
    total_energy_isentropic_array,
)
from .grid import SpaceTimeField, TestFunction, _time_slice, weak_pairing


# --------------------------------------------------------------------------
# Renormalization functions
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class RenormalizationFunction:
    """Bounded, nondecreasing C^1 function ``Z`` with its derivative."""

    name: str
    Z: Callable
    dZ: Callable
    bound: float
    monotone: bool = True

    def __post_init__(self):
        s = np.linspace(-50.0, 50.0, 20001)
        if np.any(self.dZ(s) < 0):
            raise ValueError(f"{self.name}: Z' must be nonnegative")
        if np.max(np.abs(self.Z(s))) > self.bound * (1 + 1e-12):
            raise ValueError(f"{self.name}: declared bound too small")


def _const(c):
    return RenormalizationFunction(
        f"const({c:g})", lambda s: np.full_like(np.asarray(s, dtype=float), c),
        lambda s: np.zeros_like(np.asarray(s, dtype=float)), abs(c))


def _tanh(c, w):
    return RenormalizationFunction(
        f"tanh(c={c:g},w={w:g})",
        lambda s: np.tanh((np.asarray(s, dtype=float) - c) / w),
        lambda s: 1.0 / (w * np.cosh((np.asarray(s, dtype=float) - c) / w) ** 2),
        1.0)


def _atan(c, w):
    return RenormalizationFunction(
        f"atan(c={c:g},w={w:g})",
        lambda s: (2.0 / math.pi) * np.arctan((np.asarray(s, dtype=float) - c) / w),
        lambda s: (2.0 / math.pi) / (w * (1.0 + ((np.asarray(s, dtype=float) - c) / w) ** 2)),
        1.0)


def renormalization_library() -> list:
    """The fixed battery of eight renormalizations."""
    return [
        _const(1.0), _const(-0.5),
        _tanh(0.0, 1.0), _tanh(0.0, 0.2), _tanh(1.0, 1.0), _tanh(-1.0, 0.5),
        _atan(0.0, 1.0), _atan(0.5, 0.1),
    ]


# --------------------------------------------------------------------------
# Pointwise flux helpers on stacked (nt, ...) arrays
# --------------------------------------------------------------------------


def _convective(field_: SpaceTimeField, g) -> np.ndarray:
    m = np.moveaxis(field_.m, 1, 0)
    C = convective_tensor_array(field_.rho, m, g)  # (d, d, nt, ...)
    return np.moveaxis(C, 2, 0)


def _pressure(field_: SpaceTimeField, g) -> np.ndarray:
    if field_.is_full:
        return (g.gamma - 1.0) * internal_energy_array(field_.rho, field_.S, g)
    return pressure_isentropic(field_.rho, g)


def _velocity(field_: SpaceTimeField, g) -> np.ndarray:
    vac = field_.rho <= g.rho_vac
    safe = np.where(vac, 1.0, field_.rho)
    return np.where(vac[:, None], 0.0, field_.m / safe[:, None])


def energy_density(field_: SpaceTimeField, g, relative: bool = True) -> np.ndarray:
    """Cellwise energy: full ``E``, or the isentropic energy relative to the
    far field (total energy when the field has none or ``relative=False``)."""
    m = np.moveaxis(field_.m, 1, 0)
    if field_.is_full:
        return total_energy_full_array(field_.rho, m, field_.S, g)
    if relative and field_.far is not None:
        return relative_energy_isentropic_array(field_.rho, m, field_.far.rho_inf,
                                                np.asarray(field_.far.m_inf), g)
    return total_energy_isentropic_array(field_.rho, m, g)


def space_integrals(field_: SpaceTimeField, density: np.ndarray) -> np.ndarray:
    """Per-time midpoint integrals of a stacked density."""
    axes = tuple(range(density.ndim - field_.grid.dim, density.ndim))
    return density.sum(axis=axes) * field_.grid.cell_volume


# --------------------------------------------------------------------------
# Residuals
# --------------------------------------------------------------------------


def _require(tf: TestFunction, kind: str):
    if tf.kind != kind:
        raise ValueError(f"expected a {kind} test function, got {tf.kind}")


def continuity_residual(field_: SpaceTimeField, tf: TestFunction, tau: float | None = None) -> float:
    """``int_0^tau int [rho psi' phi + psi m . grad phi]``."""
    _require(tf, "scalar")
    return (weak_pairing(field_, tf, "scalar_dt", field_.rho, tau)
            + weak_pairing(field_, tf, "vector_grad", field_.m, tau))


def momentum_residual(field_: SpaceTimeField, tf: TestFunction, tau: float | None,
                      g: GasParameters) -> float:
    """``int_0^tau int [psi' m . varphi + psi (m x m / rho) : grad varphi + psi p div varphi]``."""
    _require(tf, "vector")
    return (weak_pairing(field_, tf, "vector_dt", field_.m, tau)
            + weak_pairing(field_, tf, "matrix_grad", _convective(field_, g), tau)
            + weak_pairing(field_, tf, "scalar_div", _pressure(field_, g), tau))


def energy_residual_full(field_: SpaceTimeField, tf: TestFunction, tau: float | None,
                         g: GasParameters) -> float:
    """Weak residual of the total energy balance of the complete system."""
    _require(tf, "scalar")
    if not field_.is_full:
        raise ValueError("energy balance residual needs a full-system field")
    E = energy_density(field_, g)
    flux = (E + _pressure(field_, g))[:, None] * _velocity(field_, g)
    return (weak_pairing(field_, tf, "scalar_dt", E, tau)
            + weak_pairing(field_, tf, "vector_grad", flux, tau))


def entropy_residual(field_: SpaceTimeField, tf: TestFunction, Z: RenormalizationFunction,
                     tau: float | None = None) -> float:
    """Defect ``-int int [rho Z(s) psi' phi + psi Z(s) m . grad phi]`` with ``s = S/rho``.

    Nonnegative (up to quadrature) for fields obeying the renormalized
    entropy inequality; vacuum cells contribute nothing.
    """
    _require(tf, "scalar")
    if not field_.is_full:
        raise ValueError("entropy residual needs a full-system field")
    X = field_.grid.centers()
    sl = _time_slice(field_.times, tau)
    if np.any(tf.phi(X) < 0) or np.any(tf.psi(field_.times[sl]) < 0):
        raise ValueError("entropy test function must be nonnegative")
    vac = field_.rho <= 0.0
    s = np.where(vac, 0.0, field_.S / np.where(vac, 1.0, field_.rho))
    Zs = np.where(vac, 0.0, Z.Z(s))
    return -(weak_pairing(field_, tf, "scalar_dt", field_.rho * Zs, tau)
             + weak_pairing(field_, tf, "vector_grad", Zs[:, None] * field_.m, tau))


# --------------------------------------------------------------------------
# Energy inequality and stability
# --------------------------------------------------------------------------


@dataclass
class EnergyInequalityReport:
    passed: bool
    slack: np.ndarray
    min_slack: float
    tol: float
    initial_energy: float


def energy_inequality_isentropic(field_: SpaceTimeField, g: GasParameters, tau: float | None = None,
                                 tol: float | None = None) -> EnergyInequalityReport:
    """Slack ``int E(0) - int E(t)`` of the relative-energy inequality at every
    output time up to ``tau``."""
    sl = _time_slice(field_.times, tau) if tau is not None else slice(None)
    E = space_integrals(field_, energy_density(field_, g))[sl]
    slack = E[0] - E
    if tol is None:
        tol = 1e-8 * max(abs(E[0]), 1.0)
    mn = float(slack.min())
    return EnergyInequalityReport(mn >= -tol, slack, mn, tol, float(E[0]))


@dataclass
class StabilityBudget:
    """Declared bounds: mass ``M``, entropy lower bound ``S_lower`` and the
    tolerance under which the final energy excess counts as vanished."""

    M: float
    S_lower: float = -np.inf
    e_tol: float = 1e-8
    e_n: list = field(default_factory=list)


@dataclass
class StabilityReport:
    verdict: str
    levels: list
    mass_sup: list
    entropy_inf: list
    energy_excess: list
    l1_sup: list
    offending: list
    initial_energy: list

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"


def stability_check(sequence: list, budget: StabilityBudget, g: GasParameters,
                    reference_energy: float | None = None) -> StabilityReport:
    """Uniform mass/entropy bounds and the realized energy excess ``e_n``.

    ``e_n = max(0, sup_t int E(t) - E_0)`` where ``E_0`` is each member's own
    initial energy, or ``reference_energy`` when given.
    """
    levels, mass, ent, exc, l1, E0s, offending = [], [], [], [], [], [], []
    for f in sequence:
        E = space_integrals(f, energy_density(f, g))
        E0 = float(E[0]) if reference_energy is None else reference_energy
        e_n = max(0.0, float(E.max() - E0))
        rho_int = space_integrals(f, f.rho)
        l1_t = rho_int + space_integrals(f, np.sqrt(np.sum(f.m**2, axis=1)))
        S_int = None
        if f.is_full:
            S_int = space_integrals(f, f.S)
            l1_t = l1_t + space_integrals(f, np.abs(f.S))
        levels.append(f.level)
        mass.append(float(rho_int.max()))
        ent.append(None if S_int is None else float(S_int.min()))
        exc.append(e_n)
        l1.append(float(l1_t.max()))
        E0s.append(E0)
    scale = max(max(abs(e) for e in E0s), 1.0)
    tol = budget.e_tol * scale
    for k, lev in enumerate(levels):
        bad = mass[k] > budget.M or (ent[k] is not None and ent[k] < budget.S_lower)
        prev = exc[k - 1] if k > 0 else tol
        if exc[k] > max(prev, tol) * (1 + 1e-9):
            bad = True
        if not np.isfinite(exc[k]):
            bad = True
        if bad:
            offending.append(lev)
    verdict = "stable" if not offending and exc[-1] <= tol else "not stable"
    budget.e_n = list(exc)
    return StabilityReport(verdict, levels, mass, ent, exc, l1, offending, E0s)


# --------------------------------------------------------------------------
# Consistency over a battery
# --------------------------------------------------------------------------


@dataclass
class ResidualReport:
    levels: list
    h: list
    eps: list
    e1: np.ndarray
    e2: np.ndarray
    e1_sup: np.ndarray
    e2_sup: np.ndarray
    slope_e1: float
    slope_e2: float
    decreasing: bool
    final_ratio: float
    verdict: str
    tol: float

    def rows(self) -> list:
        return [
            {"level": lv, "h": h, "eps": e, "e1_sup": float(a), "e2_sup": float(b)}
            for lv, h, e, a, b in zip(self.levels, self.h, self.eps, self.e1_sup, self.e2_sup)
        ]


def log2_slope(values) -> float:
    """Least-squares decay rate ``-d log2(v) / d level``; nan if any value is 0."""
    v = np.asarray(values, dtype=float)
    if len(v) < 2 or np.any(v <= 0):
        return float("nan")
    n = np.arange(len(v))
    return float(-np.polyfit(n, np.log2(v), 1)[0])


def consistency_battery(sequence: list, battery: list, g: GasParameters, tau: float | None = None,
                        tol_consistency: float = 1e-3, atol: float = 1e-13) -> ResidualReport:
    """Sup over the battery of ``|e1_n|`` (scalar members) and ``|e2_n|``
    (vector members) at every level.

    Verdicts: ``consistent`` when both sups strictly decrease and end below
    ``tol_consistency`` times their level-1 value (or are zero to ``atol``);
    ``consistent-trend`` when they strictly decrease but stay above that
    floor; ``not consistent`` otherwise.
    """
    scal = [tf for tf in battery if tf.kind == "scalar"]
    vec = [tf for tf in battery if tf.kind == "vector"]
    if not scal and not vec:
        raise ValueError("empty battery")
    e1 = np.array([[continuity_residual(f, tf, tau) for tf in scal] for f in sequence]).reshape(len(sequence), -1)
    e2 = np.array([[momentum_residual(f, tf, tau, g) for tf in vec] for f in sequence]).reshape(len(sequence), -1)
    s1 = np.abs(e1).max(axis=1, initial=0.0)
    s2 = np.abs(e2).max(axis=1, initial=0.0)

    def trend(s):
        if s.max() <= atol:
            return True, True, 0.0
        dec = bool(np.all(np.diff(s) < 0))
        ratio = float(s[-1] / s[0]) if s[0] > 0 else float("inf")
        return dec, ratio < tol_consistency, ratio

    d1, f1, r1 = trend(s1) if scal else (True, True, 0.0)
    d2, f2, r2 = trend(s2) if vec else (True, True, 0.0)
    decreasing = d1 and d2
    if decreasing and f1 and f2:
        verdict = "consistent"
    elif decreasing:
        verdict = "consistent-trend"
    else:
        verdict = "not consistent"
    return ResidualReport(
        levels=[f.level for f in sequence],
        h=[f.grid.h for f in sequence],
        eps=[float(f.meta.get("eps", 0.0)) for f in sequence],
        e1=e1, e2=e2, e1_sup=s1, e2_sup=s2,
        slope_e1=log2_slope(s1), slope_e2=log2_slope(s2),
        decreasing=decreasing, final_ratio=max(r1, r2), verdict=verdict, tol=tol_consistency,
    )
