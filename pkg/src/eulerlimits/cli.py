"""Command-line entry point.

Subcommands: generate, verify, defect, liouville, jensen, dichotomy, report.
Exit codes: 0 ok/match, 1 runtime error, 2 expectation mismatch,
3 inconclusive.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .config import ExperimentConfig
from .report import EXIT_ERROR, EXIT_OK, dumps_json, emit_report, exit_code

log = logging.getLogger("eulerlimits")


def _load(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig({})
    return cfg.with_overrides(seed=args.seed, levels=args.levels, expect=args.expect, output=args.out)


def _out(cfg) -> Path:
    p = Path(cfg["output"])
    p.mkdir(parents=True, exist_ok=True)
    return p


def cmd_generate(cfg, args) -> int:
    from .pipeline import build_sequence
    from .serialize import write_field

    out = _out(cfg) / "fields"
    out.mkdir(exist_ok=True)
    for f in build_sequence(cfg):
        write_field(f, out / f"level_{f.level}.euf")
    (out.parent / "config.yaml").write_text(cfg.dumps())
    return EXIT_OK


def cmd_verify(cfg, args) -> int:
    from .pipeline import _batteries, build_sequence
    from .report import write_levels
    from .residuals import StabilityBudget, consistency_battery, energy_inequality_isentropic, stability_check

    spec = cfg.sequence_spec()
    g = spec.g
    seq = build_sequence(cfg)
    scal, vec = _batteries(cfg, spec.grid(1), spec.T)
    rep = consistency_battery(seq, scal + vec, g, None, cfg.tol["tol_consistency"])
    rows = []
    summary = {"consistency": rep.verdict, "slope_e1": rep.slope_e1, "slope_e2": rep.slope_e2,
               "final_ratio": rep.final_ratio}
    if cfg["system"] == "full":
        st = stability_check(seq, StabilityBudget(M=float(cfg["generator"].get("M", 1e300))), g)
        summary["stability"] = st.verdict
    for k, f in enumerate(seq):
        if f.is_full:
            slack, verdict = float("nan"), "n/a"
        else:
            ei = energy_inequality_isentropic(f, g)
            slack, verdict = ei.min_slack, "admissible" if ei.passed else "energy-violation"
        rows.append({"level": f.level, "h": f.grid.h, "eps": float(f.meta.get("eps", 0.0)),
                     "e1_sup": float(rep.e1_sup[k]), "e2_sup": float(rep.e2_sup[k]),
                     "energy_slack": slack, "entropy_min_slack": float("nan"), "verdict": verdict})
    out = _out(cfg)
    write_levels(rows, out / "verify.csv")
    (out / "verify.json").write_text(dumps_json(summary))
    print(json.dumps({"consistency": rep.verdict}))
    return EXIT_OK


def _defects(cfg):
    from .pipeline import run_dichotomy_isentropic

    if cfg["system"] != "isentropic":
        raise ValueError("defect measures are computed for the isentropic system")
    return run_dichotomy_isentropic(cfg)


def cmd_defect(cfg, args) -> int:
    from .serialize import write_matrix_measure, write_scalar_measure

    res = _defects(cfg)
    dr = res.artifacts["defects"]
    out = _out(cfg)
    write_scalar_measure(dr.R_e, out / "R_e.csv")
    write_matrix_measure(dr.R_v, out / "R_v.csv")
    write_matrix_measure(dr.D, out / "D.csv")
    ev = res.verdict.evidence
    keys = ("defect_mass", "defect_level_mass", "R_e_total", "R_v_trace_total",
            "identity_gap", "identity_relative_gap", "s1_relative_gap")
    (out / "defects.json").write_text(dumps_json({k: ev[k] for k in keys}))
    print(json.dumps({"defect_mass": ev["defect_mass"]}))
    return EXIT_OK


def cmd_liouville(cfg, args) -> int:
    from .liouville import BumpPotential, counterexample_field, liouville_verdict
    from .serialize import write_matrix_measure

    out = _out(cfg)
    if args.counterexample:
        from .grid import Grid

        n = int(cfg["sequence"]["base_cells"][0])
        grid = Grid((n, n), ((-1.0, 1.0), (-1.0, 1.0)), "far_field_padded", 0.25)
        D = counterexample_field(BumpPotential(), grid)
    else:
        D = _defects(cfg).artifacts["defects"].D
    lv = liouville_verdict(D, cfg["mode"], seed=int(cfg["seed"]), tol_div_rel=cfg.tol["tol_div"])
    write_matrix_measure(D, out / "liouville_D.csv")
    summary = {"verdict": lv.verdict, "psd": lv.psd, "min_eig": lv.min_eig,
               "total_variation": lv.total_variation, "sup_div": lv.sup_div, "tol_div": lv.tol_div,
               "divergence_free": lv.divergence_free,
               "boundary": None if lv.boundary is None else lv.boundary.verdict}
    (out / "liouville.json").write_text(dumps_json(summary))
    print(json.dumps({"verdict": lv.verdict}))
    return EXIT_OK


def cmd_jensen(cfg, args) -> int:
    from .pipeline import build_sequence, coarse_grid
    from .serialize import write_young
    from .young import classify_young, empirical_young, full_energy, isentropic_energy

    g = cfg.gas()
    f = build_sequence(cfg)[-1]
    ym = empirical_young(f, coarse_grid(cfg))
    E = full_energy(g) if f.is_full else isentropic_energy(g)
    s_lower = cfg["entropy_floor"] if f.is_full else None
    jr = classify_young(ym, E, cfg.tol["tol_jensen"], s_lower=s_lower)
    out = _out(cfg)
    write_young(ym, out / "young.csv")
    gaps = np.where(np.isfinite(jr.gaps), jr.gaps, np.inf)
    (out / "jensen.json").write_text(dumps_json({"counts": jr.counts, "gaps": gaps, "classes": jr.classes}))
    print(json.dumps({"counts": jr.counts}))
    return EXIT_OK


def cmd_dichotomy(cfg, args) -> int:
    from .pipeline import run_dichotomy

    res = run_dichotomy(cfg)
    out = _out(cfg)
    (out / "config.yaml").write_text(cfg.dumps())
    code = emit_report(res, out, plots=args.plots)
    print(json.dumps({"branch": res.verdict.branch, "exit_code": code}))
    return code


def cmd_report(cfg, args) -> int:
    path = Path(cfg["output"]) / "summary.json"
    if not path.exists():
        return emit_report(None, cfg["output"], config=cfg.data)
    summary = json.loads(path.read_text())
    print(json.dumps({"branch": summary["branch"], "flags": summary["flags"]}))
    return exit_code(summary["branch"], cfg["expect"] or summary.get("expect"))


COMMANDS = {
    "generate": cmd_generate,
    "verify": cmd_verify,
    "defect": cmd_defect,
    "liouville": cmd_liouville,
    "jensen": cmd_jensen,
    "dichotomy": cmd_dichotomy,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=str, default=None, help="YAML experiment file")
    common.add_argument("--out", type=str, default=None, help="output directory")
    common.add_argument("--seed", type=int, default=None, help="override the seeds")
    common.add_argument("--expect", choices=("strong", "defect"), default=None)
    common.add_argument("--levels", type=int, default=None, help="number of refinement levels")
    common.add_argument("-v", "--verbose", action="store_true")
    p = argparse.ArgumentParser(prog="eulerlimits", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, parents=[common])
        if name == "dichotomy":
            sp.add_argument("--plots", action="store_true", help="also write SVG plots")
        if name == "liouville":
            sp.add_argument("--counterexample", action="store_true",
                            help="test the Hessian-rotation field instead of the sequence defect")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load(args)
        return COMMANDS[args.command](cfg, args)
    except Exception as exc:  # exit code 1 with a one-line message
        log.debug("failure", exc_info=True)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
