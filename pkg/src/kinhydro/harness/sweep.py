"""Epsilon sweeps: one paired run per (epsilon, seed), then a log-log fit."""

from __future__ import annotations

import dataclasses
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..core import ModelParams, RunConfig, config_from_dict, config_to_dict, validate_config
from ..errors import ConfigError, DegenerateFit
from ..fields import ForceModel
from ..fluid import ISOTHERMAL
from .pair import run_pair

log = logging.getLogger(__name__)

INTERACTION_CASES = ("coulomb", "weakly_regular", "strongly_regular")
FUNCTIONALS = ("auto", "E", "E_hat", "E_hat_dbl")
TEMPERATURE_RULES = ("auto", "unit", "eps", "sqrt_eps", "base")
MIN_EPSILON = 0.05
MONOTONE_TOL = 0.10
FREE_ENERGY_C = 10.0


def fit_slope(points) -> tuple[float, float, float]:
    """Least-squares line through (x, y) pairs: (slope, intercept, max |residual|)."""
    pts = np.asarray(list(points), dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 2 or pts.shape[1] != 2:
        raise DegenerateFit("need at least two (x, y) points")
    if not np.all(np.isfinite(pts)):
        raise DegenerateFit("non-finite point")
    x, y = pts[:, 0], pts[:, 1]
    if np.ptp(x) == 0:
        raise DegenerateFit("all x values coincide")
    a = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(a, y, rcond=None)
    resid = y - (slope * x + intercept)
    return float(slope), float(intercept), float(np.max(np.abs(resid)))


@dataclass(frozen=True)
class SweepPlan:
    """A family of paired runs differing only in epsilon (and seed).

    ``dt_over_eps`` ties the kinetic step to epsilon; ``snapshot_interval``
    fixes the metric clock for every epsilon.  Seeds are base.seed + i.
    ``init_temperature_rule`` picks the velocity spread of the initial data:
    "auto" is "unit" in the diffusive regime and "eps" in the diffusionless
    one; "base" keeps the base config value.
    """

    base: RunConfig
    epsilons: tuple
    regime: str = "diffusive"
    interaction_case: str = "weakly_regular"
    functional: str = "auto"
    dt_over_eps: float = 1.0 / 16.0
    snapshot_interval: float = 0.025
    n_seeds: int = 3
    init_temperature_rule: str = "auto"

    def violations(self) -> list[tuple[str, str]]:
        errs = []
        eps = list(self.epsilons)
        if not eps:
            errs.append(("epsilons", "at least one epsilon required"))
        if any(not math.isfinite(e) for e in eps):
            errs.append(("epsilons", "must be finite"))
        elif any(b >= a for a, b in zip(eps, eps[1:])):
            errs.append(("epsilons", "must be strictly decreasing"))
        if any(e < MIN_EPSILON for e in eps):
            errs.append(("epsilons", f"must all be >= {MIN_EPSILON}"))
        if any(e > 1 for e in eps):
            errs.append(("epsilons", "must all be <= 1"))
        if self.regime not in ("diffusive", "diffusionless"):
            errs.append(("regime", "diffusive or diffusionless"))
        if self.interaction_case not in INTERACTION_CASES:
            errs.append(("interaction_case", f"one of {INTERACTION_CASES}"))
        if self.functional not in FUNCTIONALS:
            errs.append(("functional", f"one of {FUNCTIONALS}"))
        if self.init_temperature_rule not in TEMPERATURE_RULES:
            errs.append(("init_temperature_rule", f"one of {TEMPERATURE_RULES}"))
        if not (0 < self.dt_over_eps <= 0.5):
            errs.append(("dt_over_eps", "need 0 < dt <= 0.5 epsilon"))
        if self.n_seeds < 1:
            errs.append(("n_seeds", "must be >= 1"))
        if not errs:
            t = self.base.t_final
            for e in eps:
                dt = e * self.dt_over_eps
                for name, span in (("t_final", t), ("snapshot_interval", self.snapshot_interval)):
                    ratio = span / dt
                    if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-9:
                        errs.append((name, f"not a multiple of dt={dt!r} at epsilon={e!r}"))
        return errs

    def validate(self) -> "SweepPlan":
        errs = self.violations()
        if errs:
            raise ConfigError(errs)
        return self

    def init_temperature(self, eps: float) -> float:
        rule = self.init_temperature_rule
        if rule == "auto":
            rule = "unit" if self.regime == "diffusive" else "eps"
        return {"unit": 1.0, "eps": eps, "sqrt_eps": math.sqrt(eps),
                "base": self.base.init_temperature}[rule]

    def config_for(self, eps: float, seed_index: int) -> RunConfig:
        b = self.base
        p = b.params
        make = ModelParams.diffusive if self.regime == "diffusive" else ModelParams.diffusionless
        params = make(eps, p.gamma, p.lam, p.alpha)
        dt = eps * self.dt_over_eps
        interaction = "coulomb" if self.interaction_case == "coulomb" else "kernel"
        cfg = b.replace(params=params, dt=dt, seed=b.seed + seed_index,
                        snapshot_stride=max(1, int(round(self.snapshot_interval / dt))),
                        interaction=interaction,
                        init_temperature=self.init_temperature(eps))
        return validate_config(cfg)

    def to_dict(self) -> dict:
        return {
            "base": config_to_dict(self.base),
            "epsilons": list(self.epsilons),
            "regime": self.regime,
            "interaction_case": self.interaction_case,
            "functional": self.functional,
            "dt_over_eps": self.dt_over_eps,
            "snapshot_interval": self.snapshot_interval,
            "n_seeds": self.n_seeds,
            "init_temperature_rule": self.init_temperature_rule,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "SweepPlan":
        if not isinstance(raw, dict):
            raise ConfigError([("plan", "must be an object")])
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(raw) - known)
        if unknown:
            raise ConfigError([(k, "unknown key") for k in unknown])
        if "base" not in raw or "epsilons" not in raw:
            raise ConfigError([("plan", "needs 'base' and 'epsilons'")])
        kw = {k: v for k, v in raw.items() if k not in ("base", "epsilons")}
        for key in ("dt_over_eps", "snapshot_interval"):
            if key in kw:
                kw[key] = float(kw[key])
        eps = raw["epsilons"]
        if not isinstance(eps, list) or not all(
                isinstance(e, (int, float)) and not isinstance(e, bool) for e in eps):
            raise ConfigError([("epsilons", "must be a list of numbers")])
        return cls(base=config_from_dict(raw["base"]),
                   epsilons=tuple(float(e) for e in eps), **kw).validate()


@dataclass
class EpsilonResult:
    """Aggregated metrics of all seeds at one epsilon."""

    epsilon: float
    seeds: list
    records: list                    # one list of MetricRecord per seed
    e_per_seed: list
    coulomb_gap_per_seed: list
    l1_maxwellian_T_per_seed: list
    free_energy_ratio_per_seed: list
    gap_violations: int
    gap_rows: int

    @property
    def e_mean(self) -> float:
        return float(np.mean(self.e_per_seed))

    @property
    def e_spread(self) -> float:
        return float(np.max(self.e_per_seed) - np.min(self.e_per_seed))

    @staticmethod
    def _mean(values):
        vals = [v for v in values if v is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def coulomb_gap_mean(self):
        return self._mean(self.coulomb_gap_per_seed)

    @property
    def l1_maxwellian_T_mean(self):
        return self._mean(self.l1_maxwellian_T_per_seed)

    @property
    def free_energy_ratio_max(self) -> float:
        return float(np.max(self.free_energy_ratio_per_seed))


@dataclass
class SweepResult:
    plan: SweepPlan
    per_eps: list = field(default_factory=list)
    slope: float = math.nan
    intercept: float = math.nan
    max_residual: float = math.nan

    @property
    def epsilons(self) -> list:
        return [r.epsilon for r in self.per_eps]

    @property
    def e_values(self) -> list:
        return [r.e_mean for r in self.per_eps]

    def monotone(self, values=None, tol: float = MONOTONE_TOL) -> bool:
        """values[k+1] <= (1 + tol) values[k] along the descending epsilon list."""
        vals = self.e_values if values is None else values
        return all(b <= (1.0 + tol) * a for a, b in zip(vals, vals[1:]))

    @property
    def gap_violations(self) -> int:
        return sum(r.gap_violations for r in self.per_eps)

    @property
    def free_energy_ok(self) -> bool:
        return all(r.free_energy_ratio_max <= 1.0 for r in self.per_eps)


def _functional_value(rec, functional: str, variant: str, coulomb: bool) -> float:
    v = rec.values
    if functional == "auto":
        return v["error_functional"]
    if functional == "E":
        base = v["rel_entropy_E"] if variant == ISOTHERMAL else v["mod_kinetic_E_hat"]
    elif functional == "E_hat":
        base = v["mod_kinetic_E_hat"]
    else:
        base = v["mod_kinetic_E_hat"] + v["d_bl"] ** 2
    return base + (v["coulomb_gap"] if coulomb else 0.0)


def free_energy_ratio(records, params: ModelParams, phi_sup: float) -> float:
    """max_t (F(t) - floor) / ((F(0) - floor) exp(C (1 + gamma^2) t / beta)).

    Values <= 1 mean the exponential free-energy bound held on every snapshot.
    The floor makes both sides nonnegative; C = 10 (1 + ||phi||_inf).
    """
    c = FREE_ENERGY_C * (1.0 + phi_sup)
    f0 = records[0].values["free_energy"] - records[0].values["free_energy_floor"]
    if f0 <= 0:
        return math.inf
    rate = c * (1.0 + params.gamma**2) / params.beta
    worst = 0.0
    for rec in records:
        ft = rec.values["free_energy"] - rec.values["free_energy_floor"]
        worst = max(worst, ft / (f0 * math.exp(rate * rec.time)))
    return worst


def _run_task(args):
    cfg, workers = args
    return run_pair(cfg, workers=workers)


def epsilon_sweep(plan: SweepPlan, workers: int = 1, processes: int = 1) -> SweepResult:
    """Run the plan and fit log e(eps) against log eps.

    ``workers`` threads are used inside each particle run; ``processes`` runs
    independent (epsilon, seed) pairs in parallel.  Neither changes any number.
    """
    plan.validate()
    tasks = [(plan.config_for(e, s), workers)
             for e in plan.epsilons for s in range(plan.n_seeds)]
    if processes > 1:
        with ProcessPoolExecutor(max_workers=processes) as pool:
            pairs = list(pool.map(_run_task, tasks))
    else:
        pairs = [_run_task(t) for t in tasks]

    result = SweepResult(plan)
    for i, eps in enumerate(plan.epsilons):
        chunk = pairs[i * plan.n_seeds:(i + 1) * plan.n_seeds]
        cfg0 = chunk[0].config
        coulomb = cfg0.interaction == "coulomb"
        phi_sup = ForceModel.from_config(cfg0).weight.sup_norm
        e_vals, cg, l1, fr = [], [], [], []
        viol = rows = 0
        for pr in chunk:
            e_vals.append(max(_functional_value(r, plan.functional, pr.variant, coulomb)
                              for r in pr.records))
            cg.append(max(r.values["coulomb_gap"] for r in pr.records) if coulomb else None)
            l1.append(pr.records[-1].values.get("l1_maxwellian"))
            fr.append(free_energy_ratio(pr.records, pr.config.params, phi_sup))
            for r in pr.records:
                rows += len(r.moment_gap_rows)
                viol += len(r.violations())
        er = EpsilonResult(eps, [pr.config.seed for pr in chunk], [pr.records for pr in chunk],
                           e_vals, cg, l1, fr, viol, rows)
        result.per_eps.append(er)
        log.info("epsilon=%g e=%.4e spread=%.2e l1_T=%s F-ratio=%.3f gap violations=%d/%d",
                 eps, er.e_mean, er.e_spread, er.l1_maxwellian_T_mean,
                 er.free_energy_ratio_max, viol, rows)

    if len(result.per_eps) >= 2:
        if any(not r.e_mean > 0 for r in result.per_eps):
            raise DegenerateFit("e(epsilon) must be positive for a log-log fit")
        pts = [(math.log(r.epsilon), math.log(r.e_mean)) for r in result.per_eps]
        result.slope, result.intercept, result.max_residual = fit_slope(pts)
    return result
