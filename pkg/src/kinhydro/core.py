"""Domain types shared by every solver: coefficients, grids, run configuration.

The configuration file is a flat JSON object whose keys mirror the fields of
:class:`RunConfig`; unknown keys are rejected.  ``lambda`` is spelled out in the
file but stored as ``lam`` on the Python side.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping

import numpy as np

from .errors import ConfigError

REGIMES = ("diffusive", "diffusionless", "custom")
POTENTIALS = ("zero", "cosine_well")
INTERACTIONS = ("none", "coulomb", "kernel")
BUILTIN_INTERACTION_KERNELS = ("sine",)
BUILTIN_WEIGHTS = ("zero", "constant", "cosine")
DUMP_FORMATS = ("none", "csv", "npz")


@dataclass(frozen=True)
class ModelParams:
    """Coefficients of the kinetic equation.

    ``diffusive``: beta = sigma = 1/epsilon.  ``diffusionless``: beta =
    1/epsilon, sigma = 0.  ``custom`` only requires finite non-negative values
    and is used for unit experiments (free transport, pure damping, ...).
    """

    gamma: float = 0.0
    lam: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    sigma: float = 0.0
    epsilon: float = 1.0
    regime: str = "custom"

    @classmethod
    def diffusive(cls, epsilon: float, gamma=0.0, lam=0.0, alpha=0.0) -> "ModelParams":
        return cls(gamma, lam, alpha, 1.0 / epsilon, 1.0 / epsilon, epsilon, "diffusive")

    @classmethod
    def diffusionless(cls, epsilon: float, gamma=0.0, lam=0.0, alpha=0.0) -> "ModelParams":
        return cls(gamma, lam, alpha, 1.0 / epsilon, 0.0, epsilon, "diffusionless")

    @property
    def temperature(self) -> float:
        """sigma/beta, the variance of the local Maxwellian (0 if beta == 0)."""
        return self.sigma / self.beta if self.beta > 0 else 0.0

    def violations(self, prefix: str = "params") -> list[tuple[str, str]]:
        out = []
        names = ("gamma", "lam", "alpha", "beta", "sigma", "epsilon")
        for name in names:
            val = getattr(self, name)
            key = "lambda" if name == "lam" else name
            if not isinstance(val, (int, float)) or not math.isfinite(val):
                out.append((f"{prefix}.{key}", "must be a finite number"))
            elif val < 0:
                out.append((f"{prefix}.{key}", "must be non-negative"))
        if out:
            return out
        if self.epsilon <= 0:
            out.append((f"{prefix}.epsilon", "must be > 0"))
            return out
        inv = 1.0 / self.epsilon
        if self.regime == "diffusive":
            if not math.isclose(self.beta, inv, rel_tol=1e-12):
                out.append((f"{prefix}.beta", "must equal 1/epsilon in the diffusive regime"))
            if not math.isclose(self.sigma, inv, rel_tol=1e-12):
                out.append((f"{prefix}.sigma", "must equal 1/epsilon in the diffusive regime"))
        elif self.regime == "diffusionless":
            if not math.isclose(self.beta, inv, rel_tol=1e-12):
                out.append((f"{prefix}.beta", "must equal 1/epsilon in the diffusionless regime"))
            if self.sigma != 0:
                out.append((f"{prefix}.sigma", "sigma must be 0 in the diffusionless regime"))
        elif self.regime != "custom":
            out.append((f"{prefix}.regime", f"must be one of {REGIMES}"))
        return out


@dataclass(frozen=True)
class Grid1D:
    """Uniform periodic grid on the unit torus with cell centers (j + 1/2) h."""

    n_cells: int

    length = 1.0

    @property
    def h(self) -> float:
        return self.length / self.n_cells

    @property
    def x(self) -> np.ndarray:
        return (np.arange(self.n_cells) + 0.5) * self.h

    @property
    def wavenumbers(self) -> np.ndarray:
        """Angular wavenumbers 2*pi*k in FFT ordering."""
        return 2.0 * np.pi * np.fft.fftfreq(self.n_cells, d=self.h)

    def integrate(self, values: np.ndarray) -> float:
        return float(np.sum(values) * self.h)


@dataclass(frozen=True)
class VelocityGrid:
    """Velocity bins used only by phase-space histograms."""

    v_min: float = -7.0
    v_max: float = 7.0
    n_v: int = 64

    @property
    def hv(self) -> float:
        return (self.v_max - self.v_min) / self.n_v

    @property
    def centers(self) -> np.ndarray:
        return self.v_min + (np.arange(self.n_v) + 0.5) * self.hv

    @property
    def edges(self) -> np.ndarray:
        return np.linspace(self.v_min, self.v_max, self.n_v + 1)


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce one paired kinetic/fluid run."""

    params: ModelParams
    grid: Grid1D
    vgrid: VelocityGrid = field(default_factory=VelocityGrid)
    n_particles: int = 100_000
    dt: float = 0.01
    t_final: float = 0.5
    seed: int = 0
    potential: str = "zero"
    potential_amplitude: float = 0.0
    interaction: str = "none"
    interaction_kernel: str = "sine"
    weight: str = "zero"
    rho0_amplitude: float = 0.3
    rho0_mode: int = 1
    u0_amplitude: float = 0.2
    u0_mode: int = 1
    u0_offset: float = 0.0
    init_temperature: float = 1.0
    hist_x_bins: int = 64
    snapshot_stride: int = 1
    eps_reg: float = 1e-8
    dealias: bool = True
    dump_particles: str = "none"
    output_dir: str = "runs"

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))

    def replace(self, **changes) -> "RunConfig":
        return dataclasses.replace(self, **changes)


# Flat file keys -> (default, type tag).  Order here is the documented grammar.
_PARAM_KEYS = ("gamma", "lambda", "alpha", "beta", "sigma", "epsilon", "regime")
_GRID_KEYS = ("n_cells", "v_min", "v_max", "n_v")
_PLAIN_KEYS = tuple(
    f.name for f in dataclasses.fields(RunConfig) if f.name not in ("params", "grid", "vgrid")
)
CONFIG_KEYS = _PARAM_KEYS + _GRID_KEYS + _PLAIN_KEYS

_INT_KEYS = {"n_cells", "n_v", "n_particles", "seed", "rho0_mode", "u0_mode",
             "hist_x_bins", "snapshot_stride"}
_STR_KEYS = {"regime", "potential", "interaction", "interaction_kernel", "weight",
             "dump_particles", "output_dir"}
_BOOL_KEYS = {"dealias"}


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def config_to_dict(cfg: RunConfig) -> dict[str, Any]:
    """Flat key-value form; inverse of :func:`config_from_dict`."""
    p = cfg.params
    out: dict[str, Any] = {
        "gamma": p.gamma, "lambda": p.lam, "alpha": p.alpha, "beta": p.beta,
        "sigma": p.sigma, "epsilon": p.epsilon, "regime": p.regime,
        "n_cells": cfg.grid.n_cells, "v_min": cfg.vgrid.v_min,
        "v_max": cfg.vgrid.v_max, "n_v": cfg.vgrid.n_v,
    }
    for name in _PLAIN_KEYS:
        out[name] = getattr(cfg, name)
    return out


def config_from_dict(raw: Mapping[str, Any]) -> RunConfig:
    """Build a RunConfig from the flat mapping and validate it."""
    errors: list[tuple[str, str]] = []
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    for key in unknown:
        errors.append((key, "unknown key"))

    values: dict[str, Any] = {}
    for key, val in raw.items():
        if key in unknown:
            continue
        if key in _STR_KEYS:
            if not isinstance(val, str):
                errors.append((key, "must be a string"))
                continue
        elif key in _BOOL_KEYS:
            if not isinstance(val, bool):
                errors.append((key, "must be a boolean"))
                continue
        elif key in _INT_KEYS:
            if isinstance(val, bool) or not isinstance(val, int):
                errors.append((key, "must be an integer"))
                continue
        else:
            if isinstance(val, bool) or not isinstance(val, (int, float)):
                errors.append((key, "must be a number"))
                continue
            val = float(val)
        values[key] = val
    if errors:
        raise ConfigError(errors)

    regime = values.get("regime", "custom")
    eps = values.get("epsilon", 1.0)
    beta_default = sigma_default = 0.0
    if regime in ("diffusive", "diffusionless") and isinstance(eps, float) and eps > 0:
        beta_default = 1.0 / eps
        sigma_default = 1.0 / eps if regime == "diffusive" else 0.0
    params = ModelParams(
        gamma=values.get("gamma", 0.0),
        lam=values.get("lambda", 0.0),
        alpha=values.get("alpha", 0.0),
        beta=values.get("beta", beta_default),
        sigma=values.get("sigma", sigma_default),
        epsilon=eps,
        regime=regime,
    )
    defaults = VelocityGrid()
    cfg = RunConfig(
        params=params,
        grid=Grid1D(values.get("n_cells", 128)),
        vgrid=VelocityGrid(values.get("v_min", defaults.v_min),
                           values.get("v_max", defaults.v_max),
                           values.get("n_v", defaults.n_v)),
        **{k: values[k] for k in _PLAIN_KEYS if k in values},
    )
    return validate_config(cfg)


def load_config(path: str | Path) -> RunConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([(str(path), f"invalid JSON: {exc}")]) from exc
    if not isinstance(raw, dict):
        raise ConfigError([(str(path), "top level must be an object")])
    return config_from_dict(raw)


def _builtin_or_file(name: str, builtins: tuple[str, ...]) -> bool:
    return name in builtins or name.endswith(".csv")


def validate_config(cfg: RunConfig) -> RunConfig:
    """Check every invariant; return the config with beta/sigma normalized.

    Raises ConfigError listing each violated field.
    """
    errs = cfg.params.violations()

    n = cfg.grid.n_cells
    if not isinstance(n, int) or not _is_power_of_two(n):
        errs.append(("n_cells", "power of two required"))
    elif n < 4:
        errs.append(("n_cells", "at least 4 cells required"))

    vg = cfg.vgrid
    if not (math.isfinite(vg.v_min) and math.isfinite(vg.v_max)) or vg.v_max <= vg.v_min:
        errs.append(("v_max", "velocity grid needs v_min < v_max"))
    if not isinstance(vg.n_v, int) or vg.n_v < 2:
        errs.append(("n_v", "at least 2 velocity bins required"))

    if cfg.n_particles < 1:
        errs.append(("n_particles", "must be positive"))
    if not math.isfinite(cfg.dt) or cfg.dt <= 0:
        errs.append(("dt", "must be > 0"))
    elif not math.isfinite(cfg.t_final) or cfg.t_final < cfg.dt:
        errs.append(("t_final", "must be >= dt"))
    elif abs(cfg.t_final / cfg.dt - round(cfg.t_final / cfg.dt)) > 1e-9:
        errs.append(("t_final", "must be an integer multiple of dt"))
    if not (0 <= cfg.seed < 2**64):
        errs.append(("seed", "must fit in 64 unsigned bits"))
    if cfg.snapshot_stride < 1:
        errs.append(("snapshot_stride", "must be >= 1"))
    if not math.isfinite(cfg.eps_reg) or cfg.eps_reg < 0:
        errs.append(("eps_reg", "must be >= 0"))

    if cfg.potential not in POTENTIALS:
        errs.append(("potential", f"must be one of {POTENTIALS}"))
    if not math.isfinite(cfg.potential_amplitude) or cfg.potential_amplitude < 0:
        errs.append(("potential_amplitude", "must be >= 0"))
    if cfg.interaction not in INTERACTIONS:
        errs.append(("interaction", f"must be one of {INTERACTIONS}"))
    if cfg.interaction == "kernel" and not _builtin_or_file(
        cfg.interaction_kernel, BUILTIN_INTERACTION_KERNELS
    ):
        errs.append(("interaction_kernel", "builtin name or path to a .csv table"))
    if not _builtin_or_file(cfg.weight, BUILTIN_WEIGHTS):
        errs.append(("weight", "builtin name or path to a .csv table"))
    if cfg.dump_particles not in DUMP_FORMATS:
        errs.append(("dump_particles", f"must be one of {DUMP_FORMATS}"))

    if not (0 <= cfg.rho0_amplitude < 1):
        errs.append(("rho0_amplitude", "initial density must stay positive (|a| < 1)"))
    for key in ("rho0_mode", "u0_mode"):
        if getattr(cfg, key) < 0:
            errs.append((key, "must be >= 0"))
    if not math.isfinite(cfg.init_temperature) or cfg.init_temperature < 0:
        errs.append(("init_temperature", "must be >= 0"))
    for key in ("u0_amplitude", "u0_offset"):
        if not math.isfinite(getattr(cfg, key)):
            errs.append((key, "must be finite"))
    if cfg.hist_x_bins < 1:
        errs.append(("hist_x_bins", "must be positive"))

    if errs:
        raise ConfigError(errs)

    p = cfg.params
    if p.regime == "diffusive":
        p = dataclasses.replace(p, beta=1.0 / p.epsilon, sigma=1.0 / p.epsilon)
    elif p.regime == "diffusionless":
        p = dataclasses.replace(p, beta=1.0 / p.epsilon, sigma=0.0)
    return dataclasses.replace(cfg, params=p)


def wrap_torus(x):
    """Map to the representative in [0, 1)."""
    x = np.asarray(x, dtype=float)
    y = x - np.floor(x)
    # x - floor(x) rounds to 1.0 for tiny negative x
    y = np.where(y >= 1.0, 0.0, y)
    return y if y.ndim else float(y)


def disp(x, y):
    """Signed periodic displacement x - y, taken in [-1/2, 1/2)."""
    d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
    r = d - np.floor(d + 0.5)
    r = np.where(r >= 0.5, r - 1.0, r)
    return r if r.ndim else float(r)


def initial_profiles(cfg: RunConfig) -> tuple[np.ndarray, np.ndarray]:
    """Fluid initial data on the grid: rho0 = 1 + a cos(2 pi m x), u0 = c + b sin(2 pi n x)."""
    x = cfg.grid.x
    rho0 = 1.0 + cfg.rho0_amplitude * np.cos(2.0 * np.pi * cfg.rho0_mode * x)
    u0 = cfg.u0_offset + cfg.u0_amplitude * np.sin(2.0 * np.pi * cfg.u0_mode * x)
    if cfg.rho0_mode == 0:
        rho0 = np.ones_like(x)
    return rho0, u0
