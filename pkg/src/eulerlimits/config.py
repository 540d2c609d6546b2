"""Experiment configuration: a nested YAML document.

Grammar (every key optional, defaults shown by ``default_config()``)::

    system: isentropic | full
    mode: whole_space | bounded
    seed: int
    expect: strong | defect | null
    gas:       {gamma, a}
    sequence:  {levels, base_cells, extent, T, n_times, eps_ratio, eps_decay,
                pad, cfl, far: {rho_inf, u_inf}}
    initial:   {kind: constant | riemann | pulse, ...}
    generator: {kind, ...parameters of the generator}
    target:    riemann_exact | weak_limit | finest_level
    coarse_factor: int
    battery:   {count, seed, radius_range, time_radius_range}
    tolerances: {tol_consistency, tol_psd, tol_div, tol_identity, tol_s1,
                 tol_defect, tol_energy, tol_jensen}
    entropy_floor: float | null
    output: directory
"""
from __future__ import annotations

import copy
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .eos import FarField, GasParameters
from .generators import SequenceSpec

GENERATORS = (
    "constant", "viscous", "concentration", "oscillatory",
    "full_constant", "full_oscillatory", "full_viscous",
)
TARGETS = ("riemann_exact", "weak_limit", "finest_level")

DEFAULT_TOLERANCES = {
    "tol_consistency": 1e-3,
    "tol_psd": 1e-8,
    "tol_div": 1e-6,
    "tol_identity": 1e-6,
    "tol_s1": 0.05,
    "tol_defect": 1e-6,
    "tol_energy": 0.1,
    "tol_jensen": 1e-10,
}


def default_config() -> dict:
    return {
        "system": "isentropic",
        "mode": "whole_space",
        "seed": 7,
        "expect": None,
        "gas": {"gamma": 1.4, "a": 1.0},
        "sequence": {
            "levels": 5,
            "base_cells": [128],
            "extent": [[-1.0, 1.0]],
            "T": 0.25,
            "n_times": 201,
            "eps_ratio": 0.5,
            "eps_decay": 0.5,
            "pad": 0.25,
            "cfl": 0.45,
            "far": {"rho_inf": 1.0, "u_inf": [0.0]},
        },
        "initial": {"kind": "riemann", "left": {"rho": 2.0, "u": 0.0},
                    "right": {"rho": 1.0, "u": 0.0}, "interface": 0.0},
        "generator": {"kind": "viscous"},
        "target": "riemann_exact",
        "coarse_factor": 8,
        "battery": {"count": 16, "seed": 7, "radius_range": [0.08, 0.3],
                    "time_radius_range": [0.2, 0.45]},
        "tolerances": dict(DEFAULT_TOLERANCES),
        "entropy_floor": None,
        "output": "out",
    }


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ExperimentConfig:
    data: dict = field(default_factory=default_config)

    def __post_init__(self):
        self.data = _merge(default_config(), self.data)
        self.validate()

    def validate(self):
        d = self.data
        if d["system"] not in ("isentropic", "full"):
            raise ValueError(f"unknown system {d['system']!r}")
        if d["mode"] not in ("whole_space", "bounded"):
            raise ValueError(f"unknown mode {d['mode']!r}")
        if d["generator"]["kind"] not in GENERATORS:
            raise ValueError(f"unknown generator {d['generator']['kind']!r}")
        if d["target"] not in TARGETS:
            raise ValueError(f"unknown target {d['target']!r}")
        if d["expect"] not in (None, "strong", "defect"):
            raise ValueError("expect must be strong, defect or null")
        for k, v in d["tolerances"].items():
            if not float(v) > 0:
                raise ValueError(f"tolerance {k} must be positive")
        if int(d["coarse_factor"]) < 1:
            raise ValueError("coarse_factor must be >= 1")

    # -- accessors ---------------------------------------------------------

    def __getitem__(self, key):
        return self.data[key]

    @property
    def tol(self) -> dict:
        return {k: float(v) for k, v in self.data["tolerances"].items()}

    def gas(self) -> GasParameters:
        return GasParameters(float(self.data["gas"]["gamma"]), float(self.data["gas"]["a"]))

    def sequence_spec(self) -> SequenceSpec:
        s = self.data["sequence"]
        far = FarField(float(s["far"]["rho_inf"]), tuple(float(u) for u in s["far"]["u_inf"]))
        return SequenceSpec(
            levels=int(s["levels"]),
            base_cells=tuple(int(c) for c in s["base_cells"]),
            extent=tuple(tuple(e) for e in s["extent"]),
            g=self.gas(),
            far=far,
            T=float(s["T"]),
            n_times=int(s["n_times"]),
            eps_ratio=float(s["eps_ratio"]),
            eps_decay=float(s["eps_decay"]),
            initial=dict(self.data["initial"]),
            entropy_floor=self.data["entropy_floor"],
            pad=float(s["pad"]),
            boundary_mode="bounded_domain" if self.data["mode"] == "bounded" else "far_field_padded",
            cfl=float(s["cfl"]),
        )

    def with_overrides(self, seed: int | None = None, levels: int | None = None,
                       expect: str | None = None, output: str | None = None) -> "ExperimentConfig":
        d = copy.deepcopy(self.data)
        if seed is not None:
            d["seed"] = int(seed)
            d["battery"]["seed"] = int(seed)
        if levels is not None:
            d["sequence"]["levels"] = int(levels)
        if expect is not None:
            d["expect"] = expect
        if output is not None:
            d["output"] = str(output)
        return ExperimentConfig(d)

    # -- serialization -----------------------------------------------------

    def dumps(self) -> str:
        return yaml.safe_dump(self.data, sort_keys=True, default_flow_style=False)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls(yaml.safe_load(text) or {})

    def save(self, path):
        Path(path).write_text(self.dumps())

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.loads(Path(path).read_text())
