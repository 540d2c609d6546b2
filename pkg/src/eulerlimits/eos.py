"""Polytropic thermodynamics, total energies and relative energies.

Phase variables are ``(rho, m, S)`` for the complete system and ``(rho, m)``
for the isentropic system.  The total energy

    E(rho, m, S) = |m|^2 / (2 rho) + rho^gamma * exp(S / (c_v rho))

is extended to ``rho <= 0`` as a lower semicontinuous convex function with
values in ``[0, +inf]``.  Scalar entry points return :class:`ExtendedReal`;
the ``*_array`` helpers operate on cell arrays of finite-energy fields and
raise instead of producing infinities.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np


class InvalidStateError(ValueError):
    """A phase-space point that no energy convention can evaluate."""


# --------------------------------------------------------------------------
# Extended reals
# --------------------------------------------------------------------------


@dataclass(frozen=True, order=False)
class ExtendedReal:
    """Nonnegative real or ``+inf``, kept as a tagged value.

    Arithmetic follows measure-theoretic conventions: ``inf + x = inf``,
    ``0 * inf = 0``.  ``inf - inf`` raises.
    """

    value: float = 0.0
    infinite: bool = False

    def __post_init__(self):
        if not self.infinite:
            v = float(self.value)
            if math.isnan(v):
                raise InvalidStateError("ExtendedReal cannot hold NaN")
            if math.isinf(v):
                if v < 0:
                    raise ValueError("negative infinity is not an extended nonnegative real")
                object.__setattr__(self, "infinite", True)
                object.__setattr__(self, "value", 0.0)
            elif v < 0:
                raise ValueError(f"negative value {v!r} for ExtendedReal")
            else:
                object.__setattr__(self, "value", v)
        else:
            object.__setattr__(self, "value", 0.0)

    @classmethod
    def inf(cls) -> "ExtendedReal":
        return cls(0.0, True)

    @classmethod
    def of(cls, x) -> "ExtendedReal":
        if isinstance(x, ExtendedReal):
            return x
        return cls(float(x))

    @property
    def is_finite(self) -> bool:
        return not self.infinite

    def __float__(self) -> float:
        return math.inf if self.infinite else self.value

    def __add__(self, other):
        other = ExtendedReal.of(other)
        if self.infinite or other.infinite:
            return ExtendedReal.inf()
        return ExtendedReal(self.value + other.value)

    __radd__ = __add__

    def __mul__(self, k):
        k = float(k)
        if k < 0:
            raise ValueError("ExtendedReal may only be scaled by nonnegative factors")
        if self.infinite:
            return ExtendedReal.inf() if k > 0 else ExtendedReal(0.0)
        return ExtendedReal(self.value * k)

    __rmul__ = __mul__

    def minus(self, other) -> float:
        """Signed difference ``self - other`` as a float (``+inf`` allowed)."""
        other = ExtendedReal.of(other)
        if other.infinite:
            if self.infinite:
                raise ArithmeticError("inf - inf is undefined")
            raise ArithmeticError("finite - inf is not an extended nonnegative real")
        return math.inf if self.infinite else self.value - other.value

    def _key(self):
        return (1, 0.0) if self.infinite else (0, self.value)

    def __eq__(self, other):
        try:
            other = ExtendedReal.of(other)
        except (TypeError, ValueError):
            return NotImplemented
        return self._key() == other._key()

    def __lt__(self, other):
        return self._key() < ExtendedReal.of(other)._key()

    def __le__(self, other):
        return self._key() <= ExtendedReal.of(other)._key()

    def __gt__(self, other):
        return self._key() > ExtendedReal.of(other)._key()

    def __ge__(self, other):
        return self._key() >= ExtendedReal.of(other)._key()

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return "ExtendedReal(inf)" if self.infinite else f"ExtendedReal({self.value!r})"


INF = ExtendedReal.inf()


# --------------------------------------------------------------------------
# Parameters and states
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class GasParameters:
    """Adiabatic exponent, isentropic pressure coefficient and vacuum cut.

    ``c_v = 1/(gamma - 1)`` is derived.  ``rho_vac`` is the absolute density
    below which a cell is treated as vacuum by the array helpers.
    """

    gamma: float = 1.4
    a: float = 1.0
    rho_vac: float = 1e-12
    c_v: float = field(init=False)

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise ValueError(f"gamma must exceed 1, got {self.gamma}")
        if not self.a > 0.0:
            raise ValueError(f"a must be positive, got {self.a}")
        if self.rho_vac < 0:
            raise ValueError("rho_vac must be nonnegative")
        object.__setattr__(self, "c_v", 1.0 / (self.gamma - 1.0))


def _vec(m) -> np.ndarray:
    return np.atleast_1d(np.asarray(m, dtype=float))


@dataclass(frozen=True)
class FullState:
    rho: float
    m: tuple
    S: float

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(float(x) for x in _vec(self.m)))
        object.__setattr__(self, "rho", float(self.rho))
        object.__setattr__(self, "S", float(self.S))

    def as_array(self) -> np.ndarray:
        return np.array([self.rho, *self.m, self.S])

    @classmethod
    def from_array(cls, y) -> "FullState":
        y = np.asarray(y, dtype=float)
        return cls(y[0], tuple(y[1:-1]), y[-1])


@dataclass(frozen=True)
class IsentropicState:
    rho: float
    m: tuple

    def __post_init__(self):
        object.__setattr__(self, "m", tuple(float(x) for x in _vec(self.m)))
        object.__setattr__(self, "rho", float(self.rho))

    def as_array(self) -> np.ndarray:
        return np.array([self.rho, *self.m])

    @classmethod
    def from_array(cls, y) -> "IsentropicState":
        y = np.asarray(y, dtype=float)
        return cls(y[0], tuple(y[1:]))


@dataclass(frozen=True)
class FarField:
    """Constant state at spatial infinity; ``m_inf`` is derived."""

    rho_inf: float
    u_inf: tuple
    m_inf: tuple = field(init=False)

    def __post_init__(self):
        if not self.rho_inf >= 0:
            raise ValueError("far-field density must be nonnegative")
        u = tuple(float(x) for x in _vec(self.u_inf))
        object.__setattr__(self, "u_inf", u)
        object.__setattr__(self, "rho_inf", float(self.rho_inf))
        object.__setattr__(self, "m_inf", tuple(self.rho_inf * x for x in u))

    @property
    def dim(self) -> int:
        return len(self.u_inf)

    def state(self) -> IsentropicState:
        return IsentropicState(self.rho_inf, self.m_inf)


def _check_finite(*xs):
    for x in xs:
        if np.any(np.isnan(np.asarray(x, dtype=float))):
            raise InvalidStateError("invalid state: NaN component")


# --------------------------------------------------------------------------
# Complete system
# --------------------------------------------------------------------------


def total_energy_full(s: FullState, g: GasParameters) -> ExtendedReal:
    """Total energy with the vacuum / negative-density conventions."""
    m = np.asarray(s.m)
    _check_finite(s.rho, m, s.S)
    if s.rho > 0:
        kin = 0.5 * float(m @ m) / s.rho
        expo = s.S / (g.c_v * s.rho)
        if expo > 700.0:
            return INF
        return ExtendedReal(kin + s.rho ** g.gamma * math.exp(expo))
    if s.rho == 0 and not np.any(m) and s.S <= 0:
        return ExtendedReal(0.0)
    return INF


def internal_energy_density(rho: float, S: float, g: GasParameters) -> float:
    """``rho e = rho^gamma exp(S/(c_v rho))`` for ``rho > 0``; 0 at vacuum."""
    if rho < 0:
        raise InvalidStateError("negative density")
    if rho == 0:
        return 0.0
    return rho ** g.gamma * math.exp(S / (g.c_v * rho))


def pressure_full(s: FullState, g: GasParameters) -> float:
    _check_finite(s.rho, s.S)
    if s.rho < 0:
        raise InvalidStateError("negative density")
    return (g.gamma - 1.0) * internal_energy_density(s.rho, s.S, g)


def temperature(s: FullState, g: GasParameters) -> float:
    """Absolute temperature, the partial derivative of E in S."""
    _check_finite(s.rho, s.S)
    if s.rho <= 0:
        raise InvalidStateError("temperature undefined at vacuum")
    return s.rho ** (g.gamma - 1.0) * math.exp(s.S / (g.c_v * s.rho)) / g.c_v


def energy_gradient_full(s: FullState, g: GasParameters) -> np.ndarray:
    """Analytic gradient ``(dE/drho, dE/dm, dE/dS)`` at an interior state."""
    if s.rho <= 0:
        raise InvalidStateError("gradient requires rho > 0")
    m = np.asarray(s.m)
    ex = math.exp(s.S / (g.c_v * s.rho))
    d_rho = -0.5 * float(m @ m) / s.rho**2 + s.rho ** (g.gamma - 1.0) * ex * (
        g.gamma - s.S / (g.c_v * s.rho)
    )
    d_S = s.rho ** (g.gamma - 1.0) * ex / g.c_v
    return np.array([d_rho, *(m / s.rho), d_S])


# --------------------------------------------------------------------------
# Isentropic system
# --------------------------------------------------------------------------


def pressure_isentropic(rho, g: GasParameters):
    rho_a = np.asarray(rho, dtype=float)
    _check_finite(rho_a)
    if np.any(rho_a < 0):
        raise InvalidStateError("negative density")
    out = g.a * rho_a ** g.gamma
    return float(out) if out.ndim == 0 else out


def pressure_potential(rho, g: GasParameters):
    """``P(rho) = a/(gamma-1) rho^gamma``; ``rho P' - P = p``."""
    rho_a = np.asarray(rho, dtype=float)
    _check_finite(rho_a)
    if np.any(rho_a < 0):
        raise InvalidStateError("negative density")
    out = g.a / (g.gamma - 1.0) * rho_a ** g.gamma
    return float(out) if out.ndim == 0 else out


def pressure_potential_derivative(rho, g: GasParameters):
    rho_a = np.asarray(rho, dtype=float)
    out = g.a * g.gamma / (g.gamma - 1.0) * rho_a ** (g.gamma - 1.0)
    return float(out) if out.ndim == 0 else out


def sound_speed(rho, g: GasParameters):
    rho_a = np.asarray(rho, dtype=float)
    out = np.sqrt(g.a * g.gamma * np.maximum(rho_a, 0.0) ** (g.gamma - 1.0))
    return float(out) if out.ndim == 0 else out


def total_energy_isentropic(s: IsentropicState, g: GasParameters) -> ExtendedReal:
    m = np.asarray(s.m)
    _check_finite(s.rho, m)
    if s.rho > 0:
        return ExtendedReal(0.5 * float(m @ m) / s.rho + pressure_potential(s.rho, g))
    if s.rho == 0 and not np.any(m):
        return ExtendedReal(0.0)
    return INF


def energy_gradient_isentropic(s: IsentropicState, g: GasParameters) -> np.ndarray:
    if s.rho <= 0:
        raise InvalidStateError("gradient requires rho > 0")
    m = np.asarray(s.m)
    d_rho = -0.5 * float(m @ m) / s.rho**2 + pressure_potential_derivative(s.rho, g)
    return np.array([d_rho, *(m / s.rho)])


def _relative_potential(rho, rho_ref, g):
    return (
        pressure_potential(rho, g)
        - pressure_potential_derivative(rho_ref, g) * (rho - rho_ref)
        - pressure_potential(rho_ref, g)
    )


def relative_energy_isentropic(
    s: IsentropicState, far: FarField, g: GasParameters
) -> ExtendedReal:
    """Relative energy of ``s`` with respect to the far-field state."""
    m = np.asarray(s.m)
    _check_finite(s.rho, m)
    u_inf = np.asarray(far.u_inf)
    if s.rho < 0:
        return INF
    if s.rho == 0:
        if np.any(m):
            return INF
        kin = 0.0
    else:
        du = m / s.rho - u_inf
        kin = 0.5 * s.rho * float(du @ du)
    val = kin + _relative_potential(s.rho, far.rho_inf, g)
    # round-off may push an exact zero slightly negative
    return ExtendedReal(max(val, 0.0))


def relative_energy_isentropic_expanded(
    s: IsentropicState, far: FarField, g: GasParameters
) -> float:
    """Expanded algebraic form, valid for ``rho > 0`` only."""
    if s.rho <= 0:
        raise InvalidStateError("expanded form requires rho > 0")
    m = np.asarray(s.m)
    u = np.asarray(far.u_inf)
    return (
        0.5 * float(m @ m) / s.rho
        - float(m @ u)
        + 0.5 * s.rho * float(u @ u)
        + float(_relative_potential(s.rho, far.rho_inf, g))
    )


def relative_energy_full(s: FullState, ref: FullState, g: GasParameters) -> ExtendedReal:
    """Bregman divergence of the complete-system energy at ``(rho~, 0, S~)``."""
    if ref.rho <= 0:
        raise InvalidStateError("reference density must be positive")
    if np.any(np.asarray(ref.m)):
        raise ValueError("reference momentum must vanish")
    xi = energy_gradient_full(ref, g)
    return bregman_pointwise(
        lambda y: total_energy_full(FullState.from_array(y), g),
        s.as_array(),
        ref.as_array(),
        xi,
    )


# --------------------------------------------------------------------------
# Bregman divergence and convexity probes
# --------------------------------------------------------------------------


def bregman_pointwise(E: Callable, U, V, xi) -> ExtendedReal:
    """``E(U) - xi.(U - V) - E(V)`` for a convex ``E`` and ``xi`` in dE(V)."""
    U = np.asarray(U, dtype=float)
    V = np.asarray(V, dtype=float)
    xi = np.asarray(xi, dtype=float)
    eV = ExtendedReal.of(E(V))
    if eV.infinite:
        raise ValueError("reference outside domain")
    eU = ExtendedReal.of(E(U))
    if eU.infinite:
        return INF
    val = eU.value - float(xi @ (U - V)) - eV.value
    scale = max(abs(eU.value), abs(eV.value), abs(float(xi @ (U - V))), 1.0)
    if val < 0 and val > -1e-12 * scale:
        val = 0.0
    return ExtendedReal(val)


@dataclass
class ConvexityReport:
    checked: int
    skipped: int
    violations: int
    min_gap: float
    notes: list


def convexity_probe(E: Callable, samples: Sequence) -> ConvexityReport:
    """Midpoint strict-convexity test on pairs ``(y1, y2)``.

    A pair is tested when ``0 < E(y1) < inf``, ``E(y2) < inf`` and
    ``y1 != y2``; otherwise it is skipped with a note.
    """
    checked = skipped = violations = 0
    min_gap = math.inf
    notes = []
    for k, (y1, y2) in enumerate(samples):
        y1 = np.asarray(y1, dtype=float)
        y2 = np.asarray(y2, dtype=float)
        if np.array_equal(y1, y2):
            skipped += 1
            notes.append(f"pair {k}: identical points")
            continue
        e1 = ExtendedReal.of(E(y1))
        e2 = ExtendedReal.of(E(y2))
        if e1.infinite or e2.infinite:
            skipped += 1
            notes.append(f"pair {k}: outside domain")
            continue
        if e1.value == 0 and e2.value > 0:
            y1, y2, e1, e2 = y2, y1, e2, e1
        if e1.value == 0:
            skipped += 1
            notes.append(f"pair {k}: both points on the zero set")
            continue
        mid = float(ExtendedReal.of(E(0.5 * (y1 + y2))))
        gap = 0.5 * e1.value + 0.5 * e2.value - mid
        checked += 1
        min_gap = min(min_gap, gap)
        if not gap > 0:
            violations += 1
    return ConvexityReport(checked, skipped, violations, min_gap, notes)


# --------------------------------------------------------------------------
# Lower bounds and dominance calibration
# --------------------------------------------------------------------------


def _near_momentum_radius(far: FarField, g: GasParameters) -> float:
    return max(float(np.linalg.norm(far.m_inf)), far.rho_inf * sound_speed(far.rho_inf, g))


@dataclass(frozen=True)
class LowerBoundCalibration:
    c_near: float
    c_far: float
    samples: int


@dataclass(frozen=True)
class LowerBoundResult:
    branch: str
    ratio: float | None
    relative_energy: float
    denominator: float
    c_branch: float | None = None

    @property
    def ok(self) -> bool:
        if self.ratio is None:
            return True
        return self.c_branch is None or self.ratio >= self.c_branch * (1 - 1e-12)


def lower_bound_check(
    s: IsentropicState,
    far: FarField,
    g: GasParameters,
    calibration: LowerBoundCalibration | None = None,
) -> LowerBoundResult:
    """Classify ``s`` into the quadratic (near) or coercive (far) regime."""
    if not far.rho_inf > 0:
        raise ValueError("lower bound check needs rho_inf > 0")
    rel = relative_energy_isentropic(s, far, g)
    m = np.asarray(s.m)
    dm = m - np.asarray(far.m_inf)
    near = (
        0.5 * far.rho_inf <= s.rho <= 2.0 * far.rho_inf
        and float(np.linalg.norm(dm)) <= _near_momentum_radius(far, g)
    )
    if near:
        denom = (s.rho - far.rho_inf) ** 2 + float(dm @ dm)
        c = calibration.c_near if calibration else None
        if denom == 0.0:
            return LowerBoundResult("near", None, float(rel), 0.0, c)
        return LowerBoundResult("near", float(rel) / denom, float(rel), denom, c)
    if s.rho <= 0:
        return LowerBoundResult("far", math.inf, float(rel), math.inf,
                                calibration.c_far if calibration else None)
    denom = 1.0 + s.rho ** g.gamma + float(m @ m) / s.rho
    c = calibration.c_far if calibration else None
    return LowerBoundResult("far", float(rel) / denom, float(rel), denom, c)


def calibrate_lower_bound(
    far: FarField, g: GasParameters, rho_max: float = 20.0, m_max: float = 20.0, n: int = 81
) -> LowerBoundCalibration:
    """Grid-search the two branch constants for one ``(g, far)`` pair."""
    d = far.dim
    rhos = np.linspace(rho_max / n, rho_max, n)
    ms = np.linspace(-m_max, m_max, n)
    c_near = c_far = math.inf
    count = 0
    axes = [rhos] + [ms if k == 0 else np.linspace(-m_max, m_max, 9) for k in range(d)]
    for pt in np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d + 1):
        res = lower_bound_check(IsentropicState(pt[0], pt[1:]), far, g)
        if res.ratio is None:
            continue
        count += 1
        if res.branch == "near":
            c_near = min(c_near, res.ratio)
        else:
            c_far = min(c_far, res.ratio)
    return LowerBoundCalibration(c_near, c_far, count)


def calibrate_dominance(
    ref: FullState, g: GasParameters, span: float = 6.0, n: int = 25
) -> float:
    """Smallest ratio ``relative_energy / (|drho| + |m| + |dS|)`` on the
    grid part where the denominator is at least one."""
    d = len(ref.m)
    rho = np.linspace(max(ref.rho - span, 0.0), ref.rho + span, n)
    m = np.linspace(-span, span, n if d == 1 else 9)
    S = np.linspace(ref.S - span, ref.S + span, n)
    axes = [rho] + [m] * d + [S]
    best = math.inf
    for pt in np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, d + 2):
        dist = abs(pt[0] - ref.rho) + float(np.abs(pt[1:-1]).sum()) + abs(pt[-1] - ref.S)
        if dist < 1.0:
            continue
        val = relative_energy_full(FullState.from_array(pt), ref, g)
        if val.infinite:
            continue
        best = min(best, val.value / dist)
    return best


# --------------------------------------------------------------------------
# Cell-array helpers (finite-energy fields only)
# --------------------------------------------------------------------------


def _vacuum_mask(rho, g):
    return rho <= g.rho_vac


def kinetic_array(rho, m, g: GasParameters):
    """``1_{rho>0} |m|^2 / (2 rho)``; ``m`` has the vector axis first."""
    vac = _vacuum_mask(rho, g)
    safe = np.where(vac, 1.0, rho)
    return np.where(vac, 0.0, 0.5 * np.sum(m * m, axis=0) / safe)


def convective_tensor_array(rho, m, g: GasParameters):
    """``1_{rho>0} m (x) m / rho`` with shape ``(d, d, ...)``."""
    vac = _vacuum_mask(rho, g)
    safe = np.where(vac, 1.0, rho)
    return np.where(vac, 0.0, m[:, None] * m[None, :] / safe)


def internal_energy_array(rho, S, g: GasParameters):
    if np.any(rho < 0):
        raise InvalidStateError("negative density in field")
    vac = _vacuum_mask(rho, g)
    if np.any(vac & (S > 0)):
        raise InvalidStateError("vacuum cell with positive entropy has infinite energy")
    safe = np.where(vac, 1.0, rho)
    return np.where(vac, 0.0, safe ** g.gamma * np.exp(np.where(vac, 0.0, S / (g.c_v * safe))))


def total_energy_full_array(rho, m, S, g: GasParameters):
    return kinetic_array(rho, m, g) + internal_energy_array(rho, S, g)


def total_energy_isentropic_array(rho, m, g: GasParameters):
    if np.any(rho < 0):
        raise InvalidStateError("negative density in field")
    return kinetic_array(rho, m, g) + pressure_potential(np.maximum(rho, 0.0), g)


def relative_energy_isentropic_array(rho, m, rho_ref, m_ref, g: GasParameters):
    """Pointwise relative energy ``E(rho, m | rho_ref, m_ref)``.

    The reference may be an array (a limit field) or a broadcastable
    constant; reference cells in vacuum use ``u_ref = 0``.
    """
    rho = np.asarray(rho, dtype=float)
    if np.any(rho < 0):
        raise InvalidStateError("negative density in field")
    rho_ref = np.broadcast_to(np.asarray(rho_ref, dtype=float), rho.shape)
    m_ref = np.asarray(m_ref, dtype=float)
    if m_ref.ndim == 1:
        m_ref = m_ref.reshape((m.shape[0],) + (1,) * (m.ndim - 1))
    m_ref = np.broadcast_to(m_ref, m.shape)
    ref_vac = _vacuum_mask(rho_ref, g)
    u_ref = np.where(ref_vac, 0.0, m_ref / np.where(ref_vac, 1.0, rho_ref))
    # 0.5 rho |m/rho - u|^2 = 0.5 |m - rho u|^2 / rho
    dm = m - rho * u_ref
    kin = kinetic_array(rho, dm, g)
    pot = _relative_potential(np.maximum(rho, 0.0), rho_ref, g)
    return kin + np.maximum(pot, 0.0)


def pressure_full_array(rho, S, g: GasParameters):
    return (g.gamma - 1.0) * internal_energy_array(rho, S, g)


def relative_energy_full_array(rho, m, S, rho_r, m_r, S_r, g: GasParameters):
    """Bregman divergence of the full energy at array references.

    Reference cells in vacuum contribute 0 (no interior gradient there).
    """
    rho = np.asarray(rho, dtype=float)
    rho_r = np.broadcast_to(np.asarray(rho_r, dtype=float), rho.shape)
    m_r = np.broadcast_to(np.asarray(m_r, dtype=float), np.shape(m))
    S_r = np.broadcast_to(np.asarray(S_r, dtype=float), rho.shape)
    vac = _vacuum_mask(rho_r, g)
    safe = np.where(vac, 1.0, rho_r)
    e_r = internal_energy_array(np.where(vac, 1.0, rho_r), np.where(vac, 0.0, S_r), g)
    u_r = m_r / safe
    dE_drho = -0.5 * np.sum(u_r * u_r, axis=0) + e_r * (g.gamma / safe - S_r / (g.c_v * safe * safe))
    dE_dS = e_r / (g.c_v * safe)
    E_r = 0.5 * np.sum(m_r * m_r, axis=0) / safe + e_r
    E = total_energy_full_array(rho, m, S, g)
    lin = dE_drho * (rho - rho_r) + np.sum(u_r * (m - m_r), axis=0) + dE_dS * (S - S_r)
    out = E - lin - E_r
    return np.where(vac, 0.0, np.maximum(out, 0.0))
