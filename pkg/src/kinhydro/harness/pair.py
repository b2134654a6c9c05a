"""Paired kinetic/fluid runs with metrics at every shared snapshot time."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..core import RunConfig, validate_config
from ..errors import TimeGridMismatch
from ..fields import ForceModel
from ..fluid import ISOTHERMAL, FluidState, fluid_variant, run_fluid
from ..kinetic import KineticSnapshot, run_kinetic
from ..metrics.entropy import coulomb_gap, fluid_relative_entropy, phi_weighted_dissipation
from ..metrics.moments import moment_gap_checks
from ..metrics.phase import free_energy_and_dissipations, free_energy_floor, l1_maxwellian_gap
from ..metrics.record import MetricRecord
from ..metrics.transport import dbl_distance, w1_distance

TIME_TOL = 1e-9


@dataclass
class PairResult:
    config: RunConfig
    variant: str
    records: list[MetricRecord]
    fluid_snapshots: list[FluidState]
    kinetic_snapshots: list[KineticSnapshot] = field(default_factory=list)

    @property
    def times(self) -> np.ndarray:
        return np.array([r.time for r in self.records])

    def column(self, name: str) -> np.ndarray:
        return np.array([r.values.get(name) for r in self.records], dtype=float)


def error_functional(values: dict, variant: str, coulomb: bool) -> float:
    """The state part of the regime's convergence functional at one time."""
    if variant == ISOTHERMAL:
        e = values["rel_entropy_E"]
    else:
        e = values["mod_kinetic_E_hat"] + values["d_bl"] ** 2
    if coulomb:
        e += values["coulomb_gap"]
    return e


class _Evaluator:
    """Computes a MetricRecord from one kinetic snapshot and the matching fluid state."""

    def __init__(self, cfg: RunConfig, forces: ForceModel, variant: str, fluid_rows: list):
        self.cfg = cfg
        self.forces = forces
        self.variant = variant
        self.fluid_rows = fluid_rows
        self.floor = free_energy_floor(cfg.params, forces)
        self.coulomb = forces.interaction.kind == "coulomb"
        self.first_energy = None
        self.prev = None
        self.int_gamma = 0.0
        self.int_alpha = 0.0

    def __call__(self, index: int, snap: KineticSnapshot, flu: FluidState) -> MetricRecord:
        cfg, p, grid = self.cfg, self.cfg.params, self.cfg.grid
        mom = snap.moments
        rho_e, u_e = mom.rho, mom.u
        rho, u = flu.rho, flu.u
        v = {"seed": cfg.seed, "step": snap.step}

        fe = free_energy_and_dissipations(snap.ensemble, mom, snap.fields, p, self.forces,
                                          cfg.vgrid, cfg.hist_x_bins)
        v["free_energy"] = fe["free_energy"]
        v["free_energy_floor"] = self.floor
        for k in ("D1_diag", "D2", "D3"):
            v[k] = fe[k]
        v["kinetic_energy"] = fe["kinetic"]
        ints = snap.integrals
        v["int_local_alignment"] = ints["local_alignment"]
        v["int_D2"] = ints["D2"]
        v["int_D3"] = ints["D3"]
        v["int_phi_mass"] = ints["phi_mass"]
        if self.first_energy is None:
            self.first_energy = fe["free_energy"]
        theta = p.temperature
        v["energy_identity_residual"] = (
            fe["free_energy"] - self.first_energy
            + p.beta * ints["local_alignment"] + p.alpha * ints["D2"] + p.gamma * ints["D3"]
            - theta * (p.gamma * snap.time + p.alpha * ints["phi_mass"]))

        value, comps = fluid_relative_entropy(rho_e, u_e, rho, u, grid, self.variant)
        v["mod_kinetic_E_hat"] = comps["E_hat"]
        if self.variant == ISOTHERMAL:
            v["rel_entropy_E"] = value
            v["H_forward"] = comps["H_forward"]
            v["H_reverse"] = comps["H_reverse"]
        # distances compare probability measures; the fluid mass drift is logged apart
        fluid_mass = grid.integrate(rho)
        rho_unit = rho / fluid_mass
        if self.coulomb:
            v["coulomb_gap"] = coulomb_gap(rho_e, rho_unit, grid, p.lam)
        v["dbl_phi_dissip"] = phi_weighted_dissipation(rho_e, u_e, u, self.forces.weight, grid)
        gamma_rate = p.gamma * 2.0 * comps["E_hat"]
        alpha_rate = 0.5 * p.alpha * v["dbl_phi_dissip"]
        if self.prev is not None:
            dt = snap.time - self.prev[0]
            self.int_gamma += 0.5 * dt * (gamma_rate + self.prev[1])
            self.int_alpha += 0.5 * dt * (alpha_rate + self.prev[2])
        self.prev = (snap.time, gamma_rate, alpha_rate)
        v["int_gamma_term"] = self.int_gamma
        v["int_alpha_term"] = self.int_alpha

        v["d_bl"] = dbl_distance(rho_e, rho_unit, grid)
        v["w1"] = w1_distance(rho_e, rho_unit, grid)
        v["l1_density_gap"] = grid.integrate(np.abs(rho_e - rho))
        if self.variant == ISOTHERMAL:
            gap = l1_maxwellian_gap(snap.ensemble, rho, u, grid, cfg.vgrid, cfg.hist_x_bins)
            v["l1_maxwellian"] = gap["gap"]
            v["l1_bias_bound"] = gap["bias_bound"]

        frow = self.fluid_rows[index]
        v["fluid_energy"] = frow["energy"]
        v["fluid_energy_residual"] = frow["residual"]
        v["fluid_max_grad_u"] = frow["max_grad_u"]
        v["fluid_mass"] = fluid_mass
        v["kinetic_mass"] = grid.integrate(rho_e)
        v["kinetic_momentum"] = snap.ensemble.momentum()
        v["error_functional"] = error_functional(v, self.variant, self.coulomb)

        rows = moment_gap_checks(rho_e, u_e, rho, u, grid, ensemble=snap.ensemble,
                                 with_entropy=self.variant == ISOTHERMAL)
        return MetricRecord(snap.time, v, rows)


def run_pair(cfg: RunConfig, workers: int = 1, keep_snapshots: bool = False,
             variant: str | None = None) -> PairResult:
    """Run the kinetic and fluid solvers on one clock and compare them.

    The fluid system is integrated first (it is cheap); the kinetic generator is
    then consumed one snapshot at a time so particle arrays are not retained
    unless ``keep_snapshots`` is set.
    """
    cfg = validate_config(cfg)
    forces = ForceModel.from_config(cfg)
    variant = variant or fluid_variant(cfg)
    fluid_snaps, ledger = run_fluid(cfg, variant, forces)
    evaluate = _Evaluator(cfg, forces, variant, ledger.rows)

    records, kept = [], []
    for i, snap in enumerate(run_kinetic(cfg, forces, workers=workers)):
        if i >= len(fluid_snaps) or abs(fluid_snaps[i].time - snap.time) > TIME_TOL:
            t_f = fluid_snaps[i].time if i < len(fluid_snaps) else math.nan
            raise TimeGridMismatch(f"kinetic t={snap.time} vs fluid t={t_f} at snapshot {i}")
        records.append(evaluate(i, snap, fluid_snaps[i]))
        if keep_snapshots:
            kept.append(snap)
    if len(records) != len(fluid_snaps):
        raise TimeGridMismatch(f"{len(records)} kinetic vs {len(fluid_snaps)} fluid snapshots")
    return PairResult(cfg, variant, records, fluid_snaps, kept)


def dump_particles(result: PairResult, out_dir: str | Path) -> list[Path]:
    """Write retained particle snapshots in the format chosen by ``dump_particles``."""
    fmt = result.config.dump_particles
    if fmt == "none":
        return []
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for snap in result.kinetic_snapshots:
        ens = snap.ensemble
        stem = out_dir / f"particles_step{snap.step:06d}"
        if fmt == "npz":
            path = stem.with_suffix(".npz")
            np.savez(path, positions=ens.positions, velocities=ens.velocities,
                     time=snap.time, step=snap.step)
        else:
            path = stem.with_suffix(".csv")
            np.savetxt(path, np.column_stack([ens.positions, ens.velocities]),
                       delimiter=",", header="x,v", comments="", fmt="%.17g")
        paths.append(path)
    return paths
