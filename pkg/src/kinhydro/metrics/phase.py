"""Phase-space functionals estimated from the particle ensemble.

The entropy term of the free energy and the Maxwellian gap use a plain
(x, v) histogram.  The plug-in entropy is biased low by roughly
(occupied bins - 1) / (2N) (the Miller-Madow correction); at 64 x 64 bins and
N = 10^6 that is below 2e-3 and is not subtracted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from ..core import Grid1D, ModelParams, VelocityGrid
from ..errors import VGridTooNarrow
from ..fields import FieldSet, ForceModel, interpolate
from ..kinetic import MomentFields, ParticleEnsemble, alignment_dissipation

OUTSIDE_LIMIT = 1e-3


@dataclass(frozen=True, eq=False)
class PhaseHistogram:
    """Density estimate f on x-bins times v-bins, plus the mass left outside."""

    f: np.ndarray
    hx: float
    vgrid: VelocityGrid
    outside_fraction: float

    @property
    def x_centers(self) -> np.ndarray:
        n = self.f.shape[0]
        return (np.arange(n) + 0.5) * self.hx


def phase_histogram(ensemble: ParticleEnsemble, vgrid: VelocityGrid, x_bins: int = 64,
                    strict: bool = True) -> PhaseHistogram:
    v = ensemble.velocities
    inside = (v >= vgrid.v_min) & (v < vgrid.v_max)
    outside = 1.0 - float(np.count_nonzero(inside)) / ensemble.n
    if strict and outside > OUTSIDE_LIMIT:
        raise VGridTooNarrow(
            f"{100 * outside:.3f}% of particles outside [{vgrid.v_min}, {vgrid.v_max})")
    ix = np.minimum((ensemble.positions[inside] * x_bins).astype(np.int64), x_bins - 1)
    iv = ((v[inside] - vgrid.v_min) / vgrid.hv).astype(np.int64)
    iv = np.clip(iv, 0, vgrid.n_v - 1)
    counts = np.bincount(ix * vgrid.n_v + iv, minlength=x_bins * vgrid.n_v)
    counts = counts.reshape(x_bins, vgrid.n_v).astype(float)
    hx = 1.0 / x_bins
    f = counts / (ensemble.n * hx * vgrid.hv)
    return PhaseHistogram(f, hx, vgrid, outside)


def histogram_entropy(hist: PhaseHistogram) -> float:
    """int f log f over the histogram cells."""
    f = hist.f
    pos = f > 0
    return float(np.sum(f[pos] * np.log(f[pos])) * hist.hx * hist.vgrid.hv)


def free_energy_floor(params: ModelParams, forces: ForceModel) -> float:
    """A lower bound for F over probability densities on the torus.

    theta int f log f + (1/2) int v^2 f is minimized by the uniform-in-x Gaussian
    with variance theta, giving -(theta/2) log(2 pi theta); the potential parts
    are bounded below by lam (min W / 2 + min V).  theta = 0 drops the entropy
    part.  The Coulomb energy is nonnegative.
    """
    theta = params.temperature
    floor = -0.5 * theta * math.log(2.0 * math.pi * theta) if theta > 0 else 0.0
    w_min = 0.0
    if forces.interaction.kind == "kernel":
        w_min = forces.interaction.potential_minimum(forces.grid)
    return floor + params.lam * (0.5 * w_min + forces.potential.minimum)


def free_energy_and_dissipations(ensemble: ParticleEnsemble, moments: MomentFields,
                                 fields: FieldSet, params: ModelParams, forces: ForceModel,
                                 vgrid: VelocityGrid, x_bins: int = 64) -> dict:
    """F, D1 (histogram diagnostic), D2 and D3.

    D2 and D3 use the grid moments exactly; D1 needs the v-derivative of f and is
    only a finite-difference estimate on the histogram.
    """
    grid = forces.grid
    theta = params.temperature
    kinetic = ensemble.kinetic_energy()
    potential = params.lam * forces.potential_energy(moments.rho)
    interaction = params.lam * forces.interaction_energy(moments.rho, check_mass=False)
    hist = None
    entropy = 0.0
    if theta > 0:
        hist = phase_histogram(ensemble, vgrid, x_bins)
        entropy = histogram_entropy(hist)
    free_energy = theta * entropy + kinetic + potential + interaction

    if hist is None:
        hist = phase_histogram(ensemble, vgrid, x_bins, strict=False)
    f = hist.f
    u_bins = interpolate(moments.u, hist.x_centers, grid)
    drift = f * (u_bins[:, None] - vgrid.centers[None, :])
    flux = (theta * np.gradient(f, vgrid.hv, axis=1) if theta > 0 else 0.0) - drift
    pos = f > 0
    d1 = float(np.sum(flux[pos] ** 2 / f[pos]) * hist.hx * vgrid.hv)

    return {
        "free_energy": free_energy,
        "entropy": entropy,
        "kinetic": kinetic,
        "potential": potential,
        "interaction": interaction,
        "D1_diag": d1,
        "D2": max(0.0, alignment_dissipation(moments, fields, grid)),
        "D3": float(np.mean(ensemble.velocities**2)),
    }


def maxwellian_on_bins(rho, u, grid: Grid1D, x_centers, vgrid: VelocityGrid) -> np.ndarray:
    """M = rho (2 pi)^(-1/2) exp(-(u - v)^2 / 2) at bin centers."""
    r = interpolate(np.asarray(rho, float), x_centers, grid)
    uu = interpolate(np.asarray(u, float), x_centers, grid)
    dv = uu[:, None] - vgrid.centers[None, :]
    return r[:, None] / math.sqrt(2.0 * math.pi) * np.exp(-0.5 * dv**2)


def l1_maxwellian_gap(ensemble: ParticleEnsemble, rho, u, grid: Grid1D, vgrid: VelocityGrid,
                      x_bins: int = 64) -> dict:
    """||f_hist - M_{rho,u}||_1 over the phase-space histogram.

    Mass outside the velocity window is added exactly on both sides (the
    particle fraction and the Gaussian tails), so the gap never hides it.
    ``bias_bound`` is hx + hv + sqrt(bins / N), the order of the discretization
    plus sampling error of the estimate.
    """
    hist = phase_histogram(ensemble, vgrid, x_bins)
    m = maxwellian_on_bins(rho, u, grid, hist.x_centers, vgrid)
    cell = hist.hx * vgrid.hv
    gap = float(np.sum(np.abs(hist.f - m)) * cell)
    r = interpolate(np.asarray(rho, float), hist.x_centers, grid)
    uu = interpolate(np.asarray(u, float), hist.x_centers, grid)
    s2 = math.sqrt(2.0)
    tails = 0.5 * (erfc((vgrid.v_max - uu) / s2) + erfc((uu - vgrid.v_min) / s2))
    gap += hist.outside_fraction + float(np.sum(r * tails) * hist.hx)
    n_bins = hist.f.size
    return {
        "gap": gap,
        "bias_bound": hist.hx + vgrid.hv + math.sqrt(n_bins / ensemble.n),
        "m_mass": float(np.sum(m) * cell),
    }
