"""Report emission: structured summary, per-level table, optional SVG plots."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

from .pipeline import EXPECT_TO_BRANCH, PipelineResult

LEVEL_COLUMNS = ("level", "h", "eps", "e1_sup", "e2_sup", "energy_slack", "entropy_min_slack", "verdict")

EXIT_OK, EXIT_ERROR, EXIT_MISMATCH, EXIT_INCONCLUSIVE = 0, 1, 2, 3


def jsonable(obj):
    """Plain JSON tree; non-finite floats become the strings ``nan``/``inf``/``-inf``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isfinite(x):
            return x
        return "nan" if math.isnan(x) else ("inf" if x > 0 else "-inf")
    if obj is None or isinstance(obj, str):
        return obj
    return str(obj)


def dumps_json(obj) -> str:
    return json.dumps(jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(v):
    if isinstance(v, str):
        return v
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "%.17g" % float(v)


def write_levels(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEVEL_COLUMNS)
        for r in rows:
            w.writerow([_cell(r[c]) for c in LEVEL_COLUMNS])


def exit_code(branch: str | None, expect: str | None) -> int:
    if branch is None:
        return EXIT_OK
    if expect is not None:
        return EXIT_OK if EXPECT_TO_BRANCH[expect] == branch else EXIT_MISMATCH
    return EXIT_INCONCLUSIVE if branch == "inconclusive" else EXIT_OK


def _plots(result: PipelineResult, out: Path):
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "eulerlimits"
    meta = {"Date": None, "Creator": "eulerlimits"}
    rows = result.rows
    lv = [r["level"] for r in rows]

    fig, ax = plt.subplots(figsize=(5, 3.5))
    for key in ("e1_sup", "e2_sup"):
        vals = [max(r[key], 1e-300) for r in rows]
        ax.semilogy(lv, vals, "o-", label=key)
    ax.set_xlabel("level")
    ax.set_ylabel("sup residual")
    ax.legend()
    fig.tight_layout()
    fig.savefig(out / "residuals.svg", metadata=meta)
    plt.close(fig)

    seq = result.artifacts.get("sequence") or []
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for f in seq:
        hist = f.meta.get("energy_history")
        if hist is not None:
            ax.plot(f.times[: len(hist)], hist, label=f"level {f.level}")
    ax.set_xlabel("t")
    ax.set_ylabel("energy")
    if any(f.meta.get("energy_history") is not None for f in seq):
        ax.legend(fontsize="small")
    fig.tight_layout()
    fig.savefig(out / "energy.svg", metadata=meta)
    plt.close(fig)

    dr = result.artifacts.get("defects")
    if dr is not None:
        fig, ax = plt.subplots(figsize=(5, 3.5))
        tr = dr.D.trace
        if dr.D.grid.dim == 1:
            ax.bar(dr.D.grid.axis_centers(0), tr, width=dr.D.grid.h)
            ax.set_xlabel("x")
            ax.set_ylabel("tr D")
        else:
            im = ax.imshow(tr.T, origin="lower", extent=[v for ab in dr.D.grid.extent for v in ab])
            fig.colorbar(im, ax=ax, label="tr D")
        fig.tight_layout()
        fig.savefig(out / "defect.svg", metadata=meta)
        plt.close(fig)


def _audit_config(cfg: dict) -> dict:
    # where the files go is not part of the experiment
    return {k: v for k, v in (cfg or {}).items() if k != "output"}


def emit_report(result: PipelineResult | None, out_dir, fmt: str = "csv", plots: bool = False,
                config: dict | None = None) -> int:
    """Write ``summary.json`` and ``levels.csv`` (plus SVG plots on request)
    into ``out_dir`` and return the exit code.

    ``result=None`` writes an empty summary and a header-only table.
    """
    if fmt not in ("csv",):
        raise ValueError(f"unknown report format {fmt!r}")
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if result is None:
        summary = {"branch": None, "config": _audit_config(config), "evidence": {}, "flags": [], "exit_code": EXIT_OK}
        (out / "summary.json").write_text(dumps_json(summary))
        write_levels([], out / "levels.csv")
        return EXIT_OK
    v = result.verdict
    expect = result.config.get("expect")
    code = exit_code(v.branch, expect)
    summary = {"branch": v.branch, "evidence": v.evidence, "flags": v.flags, "config": _audit_config(result.config),
               "expect": expect, "exit_code": code}
    (out / "summary.json").write_text(dumps_json(summary))
    write_levels(result.rows, out / "levels.csv")
    if plots:
        _plots(result, out)
    return code
