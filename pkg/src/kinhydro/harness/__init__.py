"""Paired runs, epsilon sweeps, manifests and the command line."""

from .manifest import (ManifestError, config_hash, emit_manifest, load_manifest, replay,
                       summary_csv)
from .pair import PairResult, dump_particles, error_functional, run_pair
from .sweep import (EpsilonResult, SweepPlan, SweepResult, epsilon_sweep, fit_slope,
                    free_energy_ratio)

__all__ = [
    "EpsilonResult", "ManifestError", "PairResult", "SweepPlan", "SweepResult", "config_hash",
    "dump_particles", "emit_manifest", "epsilon_sweep", "error_functional", "fit_slope",
    "free_energy_ratio", "load_manifest", "replay", "run_pair", "summary_csv",
]
