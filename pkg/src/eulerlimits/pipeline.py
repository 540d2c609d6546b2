"""End-to-end dichotomy pipelines.

Isentropic: generate, test consistency, estimate the limit, evaluate its own
residuals, estimate defects, run the Liouville and momentum-defect checks,
then classify as ``strong_convergence``, ``not_a_weak_solution`` or
``inconclusive``.

Full system: generate, check the entropy floor and stability, take a trimmed
weak limit, evaluate the candidate's residuals and energy balance, build
Young measures and classify them with the sharp Jensen trichotomy.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .config import ExperimentConfig
from .defects import (
    DefectReport,
    _coarse_integrals,
    defect_report,
    extrapolate_levels,
    weak_limit_estimate,
)
from .eos import FullState, IsentropicState, relative_energy_full_array, relative_energy_isentropic_array
from .generators import (
    concentration_bump,
    constant_state_sequence,
    entropy_floor_enforce,
    full_constant_sequence,
    oscillatory_two_state,
    riemann_targets,
    to_full,
    viscous_sequence,
)
from .grid import Grid, SpaceTimeField, make_battery, prolong, restrict, trapezoid_weights
from .liouville import liouville_verdict, momentum_defect_equation_check
from .residuals import (
    StabilityBudget,
    consistency_battery,
    continuity_residual,
    energy_density,
    energy_inequality_isentropic,
    energy_residual_full,
    entropy_residual,
    momentum_residual,
    renormalization_library,
    space_integrals,
    stability_check,
)
from .young import classify_young, empirical_young, full_energy

log = logging.getLogger(__name__)

BRANCHES = ("strong_convergence", "not_a_weak_solution", "inconclusive")
EXPECT_TO_BRANCH = {"strong": "strong_convergence", "defect": "not_a_weak_solution"}


@dataclass
class DichotomyVerdict:
    branch: str
    evidence: dict = field(default_factory=dict)
    flags: list = field(default_factory=list)

    def matches(self, expect: str | None) -> bool:
        return expect is None or EXPECT_TO_BRANCH[expect] == self.branch


@dataclass
class PipelineResult:
    verdict: DichotomyVerdict
    config: dict
    rows: list
    artifacts: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# Sequence construction from a config
# --------------------------------------------------------------------------


def _state(d: dict, dim: int, full: bool):
    rho = float(d["rho"])
    if "m" in d:
        m = tuple(float(v) for v in np.atleast_1d(d["m"]))
    else:
        u = np.atleast_1d(d.get("u", [0.0] * dim)).astype(float)
        m = tuple(rho * u)
    if len(m) != dim:
        m = (m + (0.0,) * dim)[:dim]
    if full:
        return FullState(rho, m, float(d.get("S", 0.0)))
    return IsentropicState(rho, m)


def coarse_grid(cfg: ExperimentConfig) -> Grid:
    return cfg.sequence_spec().grid(1).coarsen(int(cfg["coarse_factor"]))


def _aligned_region(g1: Grid, coarse: Grid):
    out = []
    H = coarse.h
    for (lo, _), (ilo, ihi) in zip(g1.extent, g1.inner):
        w = ihi - ilo
        a = lo + np.ceil((ilo + w / 4 - lo) / H - 1e-9) * H
        b = lo + np.floor((ihi - w / 4 - lo) / H + 1e-9) * H
        if b <= a:
            raise ValueError("coarse grid too coarse for an oscillation region")
        out.append((float(a), float(b)))
    return tuple(out)


def _coarse_centre_x0(g1: Grid, coarse: Grid, factor: int):
    if factor % 2:
        raise ValueError("concentration centre needs an even coarse factor")
    x0 = []
    for k, (ilo, ihi) in enumerate(g1.inner):
        c = coarse.axis_centers(k)
        x0.append(float(c[np.argmin(np.abs(c - 0.5 * (ilo + ihi)))]))
    return x0


def build_sequence(cfg: ExperimentConfig) -> list:
    spec = cfg.sequence_spec()
    gen = dict(cfg["generator"])
    kind = gen.pop("kind")
    dim = spec.dim
    coarse = coarse_grid(cfg)
    g1 = spec.grid(1)
    if kind == "constant":
        return constant_state_sequence(spec)
    if kind == "viscous":
        return viscous_sequence(spec)
    if kind == "concentration":
        x0 = gen.get("x0") or _coarse_centre_x0(g1, coarse, int(cfg["coarse_factor"]))
        return concentration_bump(spec, x0, int(gen.get("radius_cells", 4)), float(gen.get("amplitude", 1.0)))
    if kind in ("oscillatory", "full_oscillatory"):
        full = kind == "full_oscillatory"
        A = _state(gen["A"], dim, full)
        B = _state(gen["B"], dim, full)
        outside = _state(gen["outside"], dim, full) if "outside" in gen else None
        region = gen.get("region") or _aligned_region(g1, coarse)
        seq = oscillatory_two_state(spec, A, B, float(gen.get("lam", 0.5)), region, outside,
                                    int(gen.get("cells_per_period", 8)))
        return _inject(seq, gen, cfg)
    if kind == "full_constant":
        st = _state(gen.get("state", {"rho": spec.far.rho_inf, "S": 0.0}), dim, True)
        return _inject(full_constant_sequence(spec, st), gen, cfg)
    if kind == "full_viscous":
        return [to_full(f, float(gen.get("s0", 0.0))) for f in viscous_sequence(spec)]
    raise ValueError(f"unknown generator {kind!r}")


def _inject(seq, gen, cfg):
    """Fault injection: push one cell below the entropy floor at every level."""
    if not gen.get("inject_floor_violation"):
        return seq
    s_lower = cfg["entropy_floor"]
    if s_lower is None:
        raise ValueError("floor violation injection needs an entropy_floor")
    out = []
    for f in seq:
        S = np.array(f.S)
        idx = (slice(None),) + tuple(c // 2 for c in f.grid.cells)
        S[idx] = f.rho[idx] * s_lower - 1.0
        out.append(f.replace(S=S))
    return out


# --------------------------------------------------------------------------
# Shared helpers
# --------------------------------------------------------------------------


def _on_grid(lim, member: SpaceTimeField):
    if lim.grid == member.grid:
        return lim.rho, lim.m, lim.S
    P = lambda a: None if a is None else prolong(a, lim.grid, member.grid)
    return P(lim.rho), P(lim.m), P(lim.S)


def prolonged(lim: SpaceTimeField, grid: Grid) -> SpaceTimeField:
    """Piecewise-constant copy of ``lim`` on a finer nested ``grid``."""
    if lim.grid == grid:
        return lim
    P = lambda a: None if a is None else prolong(a, lim.grid, grid)
    return lim.replace(grid=grid, rho=P(lim.rho), m=P(lim.m), S=P(lim.S))


def relative_energy_levels(sequence, limit, g) -> list:
    """``int int E(U_n | U)`` for each level, ``limit`` a field or per-level list."""
    out = []
    for k, f in enumerate(sequence):
        lim = limit[k] if isinstance(limit, (list, tuple)) else limit
        rho, m, S = _on_grid(lim, f)
        mv, mr = np.moveaxis(f.m, 1, 0), np.moveaxis(m, 1, 0)
        if f.is_full:
            e = relative_energy_full_array(f.rho, mv, f.S, rho, mr, S, g)
        else:
            e = relative_energy_isentropic_array(f.rho, mv, rho, mr, g)
        per_t = space_integrals(f, e)
        out.append(float(np.sum(trapezoid_weights(f.times) * per_t)))
    return out


def _finest_restricted(sequence) -> list:
    fin = sequence[-1]
    out = []
    for f in sequence:
        if f.grid == fin.grid:
            out.append(fin)
            continue
        R = lambda a: None if a is None else restrict(a, fin.grid, f.grid)
        out.append(SpaceTimeField(f.grid, fin.times, R(fin.rho), R(fin.m), R(fin.S), fin.far, f.level))
    return out


def _strong_trend(vals, tol_energy, floor):
    v = np.asarray(vals, dtype=float)
    if v.max() <= floor:
        return True
    return bool(np.all(np.diff(v) < 0) and v[-1] < tol_energy * v[0])


def _batteries(cfg, grid, T):
    b = cfg["battery"]
    seed = int(b["seed"])
    kw = dict(T=T, radius_range=tuple(b["radius_range"]), time_radius_range=tuple(b["time_radius_range"]))
    n = int(b["count"])
    return (make_battery(grid, n, seed, "scalar", **kw), make_battery(grid, n, seed + 1, "vector", **kw))


# --------------------------------------------------------------------------
# Isentropic pipeline
# --------------------------------------------------------------------------


def run_dichotomy_isentropic(cfg: ExperimentConfig, sequence: list | None = None) -> PipelineResult:
    tol = cfg.tol
    spec = cfg.sequence_spec()
    g = spec.g
    try:
        seq = sequence if sequence is not None else build_sequence(cfg)
    except Exception as exc:
        raise RuntimeError(f"generator {cfg['generator']['kind']!r} failed: {exc}") from exc
    coarse = coarse_grid(cfg)
    scal, vec = _batteries(cfg, spec.grid(1), spec.T)
    cons = consistency_battery(seq, scal + vec, g, None, tol["tol_consistency"])

    target = cfg["target"]
    if target == "riemann_exact":
        lim_levels = riemann_targets(spec)
        limit = lim_levels[-1]
    elif target == "finest_level":
        lim_levels = _finest_restricted(seq)
        limit = seq[-1]
    else:
        limit = weak_limit_estimate(seq, coarse)
        lim_levels = limit
    rel = relative_energy_levels(seq, lim_levels, g)

    # the limit's own residuals use the finest-grid quadrature
    lim_fine = prolonged(limit, seq[-1].grid)
    lim_e1 = np.array([continuity_residual(lim_fine, tf) for tf in scal])
    lim_e2 = np.array([momentum_residual(lim_fine, tf, None, g) for tf in vec])

    dr: DefectReport = defect_report(seq, lim_levels, coarse, g)
    seq_e2_limit, _ = extrapolate_levels(cons.e2)
    s1 = momentum_defect_equation_check(lim_fine, dr.R_v, dr.R_e, vec, g, seq_e2_limit, tol["tol_s1"])
    lv = liouville_verdict(dr.D, cfg["mode"], count=64, seed=int(cfg["seed"]),
                           tol_div_rel=tol["tol_div"])

    energies = [space_integrals(f, energy_density(f, g)) for f in seq]
    scale_E = max(max(float(e.max()) for e in energies), 1e-300)
    bnorm = max(tf.c1_norm() for tf in scal + vec)
    scale_R = scale_E * bnorm * spec.T
    mass = dr.mass
    lm = dr.level_mass
    stable_mass = len(lm) >= 2 and lm[-1] > 0 and abs(lm[-1] - lm[-2]) <= 0.2 * lm[-1]
    persistent = bool(mass > tol["tol_defect"] * scale_E and stable_mass)
    pairing_sup = float(np.abs(s1.pairing).max(initial=0.0))
    limit_res_sup = float(max(np.abs(lim_e1).max(initial=0.0), np.abs(lim_e2).max(initial=0.0)))
    nonzero = max(pairing_sup, limit_res_sup) > tol["tol_defect"] * scale_R
    strong = _strong_trend(rel, tol["tol_energy"], 1e-12 * scale_E)

    flags = []
    if strong and not persistent:
        branch = "strong_convergence"
    elif persistent and nonzero and not strong:
        branch = "not_a_weak_solution"
    else:
        branch = "inconclusive"
        if strong and persistent:
            flags.append("conflicting evidence: energy converges but defect persists")

    rows = []
    for k, f in enumerate(seq):
        ei = energy_inequality_isentropic(f, g)
        rows.append({
            "level": f.level, "h": f.grid.h, "eps": float(f.meta.get("eps", 0.0)),
            "e1_sup": float(cons.e1_sup[k]), "e2_sup": float(cons.e2_sup[k]),
            "energy_slack": ei.min_slack, "entropy_min_slack": float("nan"),
            "verdict": "admissible" if ei.passed else "energy-violation",
        })
    evidence = {
        "consistency": {"verdict": cons.verdict, "e1_sup": cons.e1_sup.tolist(), "e2_sup": cons.e2_sup.tolist(),
                        "slope_e1": cons.slope_e1, "slope_e2": cons.slope_e2,
                        "final_ratio": cons.final_ratio},
        "relative_energy": rel,
        "strong_trend": strong,
        "limit_residual_sup": limit_res_sup,
        "defect_mass": mass,
        "defect_level_mass": lm,
        "defect_persistent": persistent,
        "R_e_total": dr.R_e.total,
        "R_e_clip_mass": dr.R_e.clip_mass,
        "R_v_trace_total": float(dr.R_v.trace.sum()),
        "identity_gap": dr.identity_gap,
        "identity_relative_gap": dr.identity_relative_gap,
        "s1_relative_gap": s1.relative_gap,
        "s1_pairing_sup": pairing_sup,
        "s1_passed": s1.passed,
        "liouville": lv.verdict,
        "liouville_sup_div": lv.sup_div,
        "liouville_tol_div": lv.tol_div,
        "energy_scale": scale_E,
        "target": target,
    }
    verdict = DichotomyVerdict(branch, evidence, flags)
    artifacts = {"sequence": seq, "limit": limit, "defects": dr, "consistency": cons,
                 "s1": s1, "liouville": lv, "coarse": coarse}
    return PipelineResult(verdict, cfg.data, rows, artifacts)


# --------------------------------------------------------------------------
# Full-system pipeline
# --------------------------------------------------------------------------


def trimmed_weak_limit(sequence, coarse: Grid, g, quantile: float = 0.99):
    """Weak limit after excluding, per level, the fine cells whose energy is
    strictly above the ``quantile`` of all cell energies (over all times)."""
    rhos, ms, Ss, trimmed = [], [], [], []
    for f in sequence:
        E = energy_density(f, g)
        q = np.quantile(E, quantile)
        keep = (E <= q).astype(float)
        cnt = _coarse_integrals(keep, f.grid, coarse)
        full_cnt = _coarse_integrals(np.ones_like(keep), f.grid, coarse)
        use_all = cnt <= 0
        cnt = np.where(use_all, full_cnt, cnt)

        def avg(a, vec=False):
            w = keep[:, None] if vec else keep
            num = _coarse_integrals(a * w, f.grid, coarse)
            den = cnt[:, None] if vec else cnt
            alln = _coarse_integrals(a, f.grid, coarse)
            ua = use_all[:, None] if vec else use_all
            return np.where(ua, alln / (full_cnt[:, None] if vec else full_cnt), num / den)

        rhos.append(avg(f.rho))
        ms.append(avg(f.m, True))
        if f.is_full:
            Ss.append(avg(f.S))
        trimmed.append(float(1.0 - keep.mean()))
    rho, _ = extrapolate_levels(rhos)
    m, _ = extrapolate_levels(ms)
    S = extrapolate_levels(Ss)[0] if Ss else None
    rho = np.maximum(rho, 0.0)
    meta = {"generator": "trimmed_weak_limit", "trimmed_fraction": trimmed, "quantile": quantile}
    return SpaceTimeField(coarse, sequence[0].times, rho, m, S, sequence[0].far, 0, meta)


def run_dichotomy_full(cfg: ExperimentConfig, sequence: list | None = None) -> PipelineResult:
    tol = cfg.tol
    spec = cfg.sequence_spec()
    g = spec.g
    try:
        seq = sequence if sequence is not None else build_sequence(cfg)
    except Exception as exc:
        raise RuntimeError(f"generator {cfg['generator']['kind']!r} failed: {exc}") from exc
    if not all(f.is_full for f in seq):
        raise ValueError("the full-system pipeline needs full-system fields")
    coarse = coarse_grid(cfg)
    flags = []

    s_lower = cfg["entropy_floor"]
    floor_reports = []
    if s_lower is not None:
        for f in seq:
            floor_reports.append(entropy_floor_enforce(f, float(s_lower))[1])
        if any(r.violations for r in floor_reports):
            flags.append("entropy floor violated")

    masses = [float(space_integrals(f, f.rho).max()) for f in seq]
    gen = cfg["generator"]
    budget = StabilityBudget(M=float(gen.get("M", 1.01 * max(masses))),
                             S_lower=float(gen.get("S_lower", -np.inf)))
    stab = stability_check(seq, budget, g)
    if not stab.stable:
        flags.append("not stable")

    cand = trimmed_weak_limit(seq, coarse, g)
    cand_fine = prolonged(cand, seq[-1].grid)
    scal, vec = _batteries(cfg, spec.grid(1), spec.T)
    e1 = max((abs(continuity_residual(cand_fine, tf)) for tf in scal), default=0.0)
    e2 = max((abs(momentum_residual(cand_fine, tf, None, g)) for tf in vec), default=0.0)
    e3 = max((abs(energy_residual_full(cand_fine, tf, None, g)) for tf in scal), default=0.0)
    ent_min = min(entropy_residual(cand_fine, tf, Z) for tf in scal for Z in renormalization_library())

    E0_levels = [float(space_integrals(f, energy_density(f, g))[0]) for f in seq]
    E0 = float(extrapolate_levels(np.array(E0_levels))[0]) if len(seq) >= 3 else E0_levels[-1]
    E_cand = space_integrals(cand, energy_density(cand, g))
    E_scale = max(abs(E0), 1e-300)
    balance_gap = float(np.abs(E_cand - E0).max()) / E_scale

    ym = empirical_young(seq[-1], coarse)
    jr = classify_young(ym, full_energy(g), tol["tol_jensen"],
                        s_lower=None if s_lower is None else float(s_lower))
    gaps = np.where(np.isfinite(jr.gaps), jr.gaps, np.inf)
    c7 = True
    if jr.entropy_line is not None:
        small = gaps <= tol["tol_jensen"]
        c7 = bool(np.all(jr.classes[small & jr.entropy_line] == "dirac"))

    rel = relative_energy_levels(seq, cand, g)
    strong = _strong_trend(rel, tol["tol_energy"], 1e-12 * E_scale)
    strict = jr.counts["strict"] > 0
    all_dirac = jr.counts["dirac"] == int(np.prod(coarse.cells))

    if flags:
        branch = "inconclusive"
    elif strict and balance_gap > tol["tol_defect"]:
        branch = "not_a_weak_solution"
    elif all_dirac and strong and balance_gap <= tol["tol_defect"]:
        branch = "strong_convergence"
    else:
        branch = "inconclusive"

    rows = []
    for k, f in enumerate(seq):
        ent = min(entropy_residual(f, tf, Z) for tf in scal for Z in renormalization_library())
        rows.append({
            "level": f.level, "h": f.grid.h, "eps": float(f.meta.get("eps", 0.0)),
            "e1_sup": max((abs(continuity_residual(f, tf)) for tf in scal), default=0.0),
            "e2_sup": max((abs(momentum_residual(f, tf, None, g)) for tf in vec), default=0.0),
            "energy_slack": -stab.energy_excess[k], "entropy_min_slack": float(ent),
            "verdict": "stable" if f.level not in stab.offending else "offending",
        })
    evidence = {
        "entropy_floor_violations": [r.violations for r in floor_reports],
        "vacuum_negative_entropy": [r.vacuum_negative_S for r in floor_reports],
        "stability": {"verdict": stab.verdict, "energy_excess": stab.energy_excess,
                      "mass_sup": stab.mass_sup, "offending": stab.offending, "l1_sup": stab.l1_sup},
        "trimmed_fraction": cand.meta["trimmed_fraction"],
        "candidate_residuals": {"continuity": e1, "momentum": e2, "energy": e3, "entropy_min": ent_min},
        "energy_balance_gap": balance_gap,
        "initial_energy": E0,
        "jensen_counts": jr.counts,
        "jensen_gap_max": float(np.max(gaps[np.isfinite(gaps)], initial=0.0)),
        "c7_consistent": c7,
        "relative_energy": rel,
        "strong_trend": strong,
    }
    verdict = DichotomyVerdict(branch, evidence, flags)
    artifacts = {"sequence": seq, "limit": cand, "young": ym, "jensen": jr, "stability": stab,
                 "coarse": coarse}
    return PipelineResult(verdict, cfg.data, rows, artifacts)


def run_dichotomy(cfg: ExperimentConfig) -> PipelineResult:
    if cfg["system"] == "full":
        return run_dichotomy_full(cfg)
    return run_dichotomy_isentropic(cfg)
