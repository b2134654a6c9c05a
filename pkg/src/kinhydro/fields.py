"""Force fields on the periodic grid.

All convolutions are circular and evaluated with the FFT.  Kernel tables are
stored on the displacement lattice ``m*h`` (m = 0..G-1), which is the set of
differences between cell centers, so the spectral product reproduces the
direct sum ``sum_k K(x_j - x_k) rho_k h`` exactly up to rounding.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .core import Grid1D, RunConfig
from .errors import ConfigError, KernelAsymmetry, NonUnitMass

SYMMETRY_TOL = 1e-12


def _lattice(grid: Grid1D) -> np.ndarray:
    return np.arange(grid.n_cells) * grid.h


def _reflect(table: np.ndarray) -> np.ndarray:
    """table[-m mod G]."""
    return np.roll(table[::-1], 1)


def circular_convolve(table: np.ndarray, values: np.ndarray, h: float) -> np.ndarray:
    return h * np.fft.ifft(np.fft.fft(table) * np.fft.fft(values)).real


def direct_convolve(table: np.ndarray, values: np.ndarray, h: float) -> np.ndarray:
    """O(G^2) reference for :func:`circular_convolve`."""
    g = len(values)
    idx = (np.arange(g)[:, None] - np.arange(g)[None, :]) % g
    return h * (table[idx] @ values)


def spectral_derivative(values: np.ndarray, grid: Grid1D) -> np.ndarray:
    k = grid.wavenumbers
    if grid.n_cells % 2 == 0:
        k = k.copy()
        k[grid.n_cells // 2] = 0.0
    return np.fft.ifft(1j * k * np.fft.fft(values)).real


@dataclass(frozen=True)
class PotentialSpec:
    """Confinement V: ``zero`` or ``cosine_well`` V(x) = a (1 - cos 2 pi x)."""

    kind: str = "zero"
    amplitude: float = 0.0

    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        return self.amplitude * (1.0 - np.cos(2.0 * np.pi * x))

    def gradient(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if self.kind == "zero":
            return np.zeros_like(x)
        return 2.0 * np.pi * self.amplitude * np.sin(2.0 * np.pi * x)

    @property
    def minimum(self) -> float:
        return 0.0


def grad_confinement(spec: PotentialSpec, grid: Grid1D) -> np.ndarray:
    return spec.gradient(grid.x)


@dataclass(frozen=True, eq=False)
class InteractionSpec:
    """Interaction potential W.

    ``coulomb`` is realized spectrally (no samples).  ``kernel`` carries
    samples of grad W on the displacement lattice; they must be odd.
    """

    kind: str
    samples: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("none", "coulomb", "kernel"):
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if self.kind == "kernel":
            if self.samples is None:
                raise ValueError("kernel interaction needs samples")
            k = np.asarray(self.samples, dtype=float)
            scale = max(1.0, float(np.max(np.abs(k))))
            if np.max(np.abs(k + _reflect(k))) > SYMMETRY_TOL * scale:
                raise KernelAsymmetry("grad W table is not odd on the torus")
            object.__setattr__(self, "samples", k)

    @classmethod
    def coulomb(cls) -> "InteractionSpec":
        return cls("coulomb")

    @classmethod
    def none(cls) -> "InteractionSpec":
        return cls("none")

    @classmethod
    def sine(cls, grid: Grid1D) -> "InteractionSpec":
        """grad W(x) = sin(2 pi x)/(2 pi), i.e. W(x) = -cos(2 pi x)/(4 pi^2)."""
        s = np.sin(2.0 * np.pi * _lattice(grid)) / (2.0 * np.pi)
        # exact zeros at m = 0 and m = G/2 keep the table odd to rounding
        s[0] = 0.0
        s[grid.n_cells // 2] = 0.0
        return cls("kernel", s)

    def potential_table(self, grid: Grid1D) -> np.ndarray:
        """Mean-zero W on the lattice, the spectral antiderivative of grad W."""
        k = grid.wavenumbers.copy()
        k[grid.n_cells // 2] = 0.0
        ghat = np.fft.fft(self.samples)
        what = np.zeros_like(ghat)
        nz = k != 0
        what[nz] = ghat[nz] / (1j * k[nz])
        return np.fft.ifft(what).real

    def potential_minimum(self, grid: Grid1D) -> float:
        """Lower bound for the double integral of W rho rho at unit mass."""
        if self.kind == "kernel":
            return float(np.min(self.potential_table(grid)))
        return 0.0


@dataclass(frozen=True, eq=False)
class WeightSpec:
    """Communication weight phi sampled on the displacement lattice."""

    samples: np.ndarray
    sup_norm: float
    lipschitz: float

    @classmethod
    def from_samples(cls, samples, grid: Grid1D) -> "WeightSpec":
        s = np.asarray(samples, dtype=float)
        if s.shape != (grid.n_cells,):
            raise ValueError("weight table must have n_cells entries")
        if np.min(s) < 0:
            raise ConfigError([("weight", "phi must be non-negative")])
        scale = max(1.0, float(np.max(s)))
        if np.max(np.abs(s - _reflect(s))) > SYMMETRY_TOL * scale:
            raise KernelAsymmetry("phi table is not even on the torus")
        lip = float(np.max(np.abs(np.roll(s, -1) - s)) / grid.h)
        return cls(s, float(np.max(s)), lip)

    @classmethod
    def builtin(cls, name: str, grid: Grid1D) -> "WeightSpec":
        x = _lattice(grid)
        if name == "zero":
            s = np.zeros_like(x)
        elif name == "constant":
            s = np.ones_like(x)
        elif name == "cosine":
            s = 1.0 + 0.5 * np.cos(2.0 * np.pi * x)
            s = 0.5 * (s + _reflect(s))
        else:
            raise ConfigError([("weight", f"unknown builtin weight {name!r}")])
        return cls.from_samples(s, grid)


def load_kernel_csv(path: str | Path, grid: Grid1D) -> np.ndarray:
    """Read a two-column (x, value) table aligned with the displacement lattice.

    x may be given in [0, 1) or [-1/2, 1/2); every lattice point must appear
    exactly once.
    """
    path = Path(path)
    rows = []
    with path.open(newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().startswith("#"):
                continue
            try:
                rows.append((float(rec[0]), float(rec[1])))
            except (ValueError, IndexError):
                if rows:
                    raise ConfigError([(str(path), f"bad row {rec!r}")])
                # header line
    if len(rows) != grid.n_cells:
        raise ConfigError([(str(path), f"expected {grid.n_cells} rows, got {len(rows)}")])
    table = np.full(grid.n_cells, np.nan)
    for x, val in rows:
        m_real = (x % 1.0) / grid.h
        m = int(round(m_real)) % grid.n_cells
        if abs(m_real - round(m_real)) > 1e-9:
            raise ConfigError([(str(path), f"x={x} is not on the lattice m*h")])
        if not np.isnan(table[m]):
            raise ConfigError([(str(path), f"duplicate lattice point x={x}")])
        table[m] = val
    return table


def save_kernel_csv(path: str | Path, table: np.ndarray, grid: Grid1D) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "value"])
        for x, val in zip(_lattice(grid), table):
            w.writerow([repr(float(x)), repr(float(val))])


def _check_mass(rho: np.ndarray, tol: float = 1e-9) -> None:
    m = float(np.mean(rho))
    if abs(m - 1.0) > tol:
        raise NonUnitMass(f"density mean is {m!r}, expected 1")


def coulomb_potential(rho: np.ndarray, grid: Grid1D, check_mass: bool = True) -> np.ndarray:
    """Mean-zero Phi with -Phi'' = rho - mean(rho)."""
    if check_mass:
        _check_mass(rho)
    k = grid.wavenumbers
    rhat = np.fft.fft(rho)
    phat = np.zeros_like(rhat)
    nz = k != 0
    phat[nz] = rhat[nz] / k[nz] ** 2
    return np.fft.ifft(phat).real


def coulomb_force(rho: np.ndarray, grid: Grid1D, check_mass: bool = True) -> np.ndarray:
    """grad(W * rho) = Phi' for the torus Coulomb kernel."""
    if check_mass:
        _check_mass(rho)
    k = grid.wavenumbers.copy()
    k[grid.n_cells // 2] = 0.0
    rhat = np.fft.fft(rho)
    fhat = np.zeros_like(rhat)
    nz = k != 0
    fhat[nz] = 1j * rhat[nz] / k[nz]
    return np.fft.ifft(fhat).real


def kernel_force(rho: np.ndarray, spec: InteractionSpec, grid: Grid1D) -> np.ndarray:
    return circular_convolve(spec.samples, rho, grid.h)


def interaction_force(rho, spec: InteractionSpec, grid: Grid1D, check_mass=True) -> np.ndarray:
    if spec.kind == "coulomb":
        return coulomb_force(rho, grid, check_mass)
    if spec.kind == "kernel":
        return kernel_force(rho, spec, grid)
    return np.zeros(grid.n_cells)


def interaction_potential(rho, spec: InteractionSpec, grid: Grid1D, check_mass=True) -> np.ndarray:
    """W * rho on the grid (Coulomb: the mean-zero Poisson potential)."""
    if spec.kind == "coulomb":
        return coulomb_potential(rho, grid, check_mass)
    if spec.kind == "kernel":
        return circular_convolve(spec.potential_table(grid), rho, grid.h)
    return np.zeros(grid.n_cells)


def interaction_energy(rho, spec: InteractionSpec, grid: Grid1D, check_mass=True) -> float:
    """(1/2) * int (W * rho) rho dx, without the lambda factor."""
    if spec.kind == "none":
        return 0.0
    return 0.5 * grid.integrate(interaction_potential(rho, spec, grid, check_mass) * rho)


def phi_convolutions(rho, rho_u, spec: WeightSpec, grid: Grid1D):
    """Return (phi * rho, phi * (rho u))."""
    rho = np.asarray(rho, dtype=float)
    rho_u = np.asarray(rho_u, dtype=float)
    if rho.shape != (grid.n_cells,) or rho_u.shape != (grid.n_cells,):
        raise ValueError("shape mismatch with grid")
    fh = np.fft.fft(spec.samples)
    a = grid.h * np.fft.ifft(fh * np.fft.fft(rho)).real
    b = grid.h * np.fft.ifft(fh * np.fft.fft(rho_u)).real
    return a, b


@dataclass(frozen=True, eq=False)
class FieldSet:
    grad_V: np.ndarray
    grad_W_conv_rho: np.ndarray
    phi_conv_rho: np.ndarray
    phi_conv_rho_u: np.ndarray


@dataclass(frozen=True, eq=False)
class ForceModel:
    """The V, W and phi selections of a run, resolved on a grid."""

    grid: Grid1D
    potential: PotentialSpec
    interaction: InteractionSpec
    weight: WeightSpec

    @classmethod
    def from_config(cls, cfg: RunConfig) -> "ForceModel":
        grid = cfg.grid
        pot = PotentialSpec(cfg.potential, cfg.potential_amplitude)
        if cfg.interaction == "kernel":
            if cfg.interaction_kernel == "sine":
                inter = InteractionSpec.sine(grid)
            else:
                inter = InteractionSpec("kernel", load_kernel_csv(cfg.interaction_kernel, grid))
        else:
            inter = InteractionSpec(cfg.interaction)
        if cfg.weight.endswith(".csv"):
            weight = WeightSpec.from_samples(load_kernel_csv(cfg.weight, grid), grid)
        else:
            weight = WeightSpec.builtin(cfg.weight, grid)
        return cls(grid, pot, inter, weight)

    def fields(self, rho, rho_u, check_mass: bool = True) -> FieldSet:
        a, b = phi_convolutions(rho, rho_u, self.weight, self.grid)
        return FieldSet(
            grad_V=grad_confinement(self.potential, self.grid),
            grad_W_conv_rho=interaction_force(rho, self.interaction, self.grid, check_mass),
            phi_conv_rho=a,
            phi_conv_rho_u=b,
        )

    def potential_energy(self, rho) -> float:
        """int V rho, without lambda."""
        return self.grid.integrate(self.potential.value(self.grid.x) * rho)

    def interaction_energy(self, rho, check_mass: bool = True) -> float:
        return interaction_energy(rho, self.interaction, self.grid, check_mass)


def stencil(x: np.ndarray, grid: Grid1D):
    """Left neighbour, right neighbour and weight of the right one for points x."""
    s = x / grid.h - 0.5
    j = np.floor(s)
    t = s - j
    j = j.astype(np.int64) % grid.n_cells
    jp = j + 1
    jp[jp == grid.n_cells] = 0
    return j, jp, t


def interpolate(field: np.ndarray, x: np.ndarray, grid: Grid1D, st=None) -> np.ndarray:
    """Periodic linear interpolation from cell centers to points x in [0,1).

    ``st`` may carry a precomputed :func:`stencil` for the same points.
    """
    j, jp, t = st if st is not None else stencil(x, grid)
    fj = field[j]
    return fj + t * (field[jp] - fj)
