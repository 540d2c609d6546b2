"""Numerical checks for limits of approximate compressible Euler solutions."""
from .config import ExperimentConfig
from .eos import (
    INF, ExtendedReal, FarField, FullState, GasParameters, IsentropicState, relative_energy_full,
    relative_energy_isentropic, total_energy_full, total_energy_isentropic,
)
from .grid import Grid, SpaceTimeField
from .pipeline import DichotomyVerdict, run_dichotomy, run_dichotomy_full, run_dichotomy_isentropic
from .young import AtomicMeasure, sharp_jensen_classify

__version__ = "0.1.0"

__all__ = [
    "INF", "AtomicMeasure", "DichotomyVerdict", "ExperimentConfig", "ExtendedReal", "FarField",
    "FullState", "GasParameters", "Grid", "IsentropicState", "SpaceTimeField", "relative_energy_full",
    "relative_energy_isentropic", "run_dichotomy", "run_dichotomy_full", "run_dichotomy_isentropic",
    "sharp_jensen_classify", "total_energy_full", "total_energy_isentropic",
]
