"""Sweep manifests, CSV outputs and bitwise replay.

Layout of an output directory::

    manifest.json            plan, config hash, seeds, version, e values (hex), fit
    summary.csv              one row per epsilon
    metrics_eps<k>.csv       every snapshot of every seed at the k-th epsilon

The config hash covers the plan and every base-config field that can change a
number; ``output_dir`` and ``dump_particles`` are excluded.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from pathlib import Path

from .. import __version__
from ..errors import KinHydroError
from ..metrics.record import records_to_csv
from .sweep import SweepPlan, SweepResult, epsilon_sweep

NON_NUMERIC_KEYS = ("output_dir", "dump_particles")

SUMMARY_COLUMNS = (
    "epsilon", "e_mean", "e_spread", "e_per_seed", "coulomb_gap_mean",
    "l1_maxwellian_T_mean", "free_energy_ratio_max", "gap_violations", "gap_rows",
    "slope", "intercept",
)


class ManifestError(KinHydroError):
    """Missing, empty or inconsistent sweep outputs."""


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(plan: SweepPlan) -> str:
    d = plan.to_dict()
    for key in NON_NUMERIC_KEYS:
        d["base"].pop(key, None)
    return hashlib.sha256(_canonical(d).encode()).hexdigest()


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, int):
        return str(v)
    v = float(v)
    return repr(v) if math.isfinite(v) else ""


def summary_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SUMMARY_COLUMNS)
    for r in result.per_eps:
        w.writerow([
            _fmt(r.epsilon), _fmt(r.e_mean), _fmt(r.e_spread),
            " ".join(_fmt(e) for e in r.e_per_seed),
            _fmt(r.coulomb_gap_mean), _fmt(r.l1_maxwellian_T_mean),
            _fmt(r.free_energy_ratio_max), _fmt(r.gap_violations), _fmt(r.gap_rows),
            _fmt(result.slope), _fmt(result.intercept),
        ])
    return buf.getvalue()


def _hex(v: float) -> str:
    return float(v).hex()


def emit_manifest(result: SweepResult, out_dir: str | Path) -> Path:
    """Write manifest, summary and per-epsilon metrics; return the manifest path."""
    if not result.per_eps:
        raise ManifestError("empty sweep: nothing to write")
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        files = {}
        for k, r in enumerate(result.per_eps):
            name = f"metrics_eps{k}.csv"
            text = "".join(records_to_csv(recs) if i == 0
                           else records_to_csv(recs).split("\n", 1)[1]
                           for i, recs in enumerate(r.records))
            (out / name).write_text(text)
            files[repr(r.epsilon)] = name
        summary = summary_csv(result)
        (out / "summary.csv").write_text(summary)
        manifest = {
            "version": __version__,
            "config_hash": config_hash(result.plan),
            "plan": result.plan.to_dict(),
            "seeds": [r.seeds for r in result.per_eps],
            "e_values": {repr(r.epsilon): {"mean": _hex(r.e_mean),
                                           "per_seed": [_hex(e) for e in r.e_per_seed]}
                         for r in result.per_eps},
            "slope": _hex(result.slope),
            "intercept": _hex(result.intercept),
            "metrics_files": files,
            "summary_sha256": hashlib.sha256(summary.encode()).hexdigest(),
        }
        path = out / "manifest.json"
        path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    except OSError as exc:
        raise ManifestError(f"cannot write outputs under {out}: {exc}") from exc
    return path


def load_manifest(path: str | Path) -> dict:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from exc
    for key in ("plan", "config_hash", "e_values", "summary_sha256"):
        if key not in data:
            raise ManifestError(f"manifest {path} lacks '{key}'")
    return data


def replay(path: str | Path, out_dir: str | Path | None = None, workers: int = 1,
           processes: int = 1) -> dict:
    """Re-run the sweep recorded in a manifest and compare bit for bit.

    Returns a report with ``identical`` (e values, slope and summary bytes all
    equal) and the individual comparisons.
    """
    data = load_manifest(path)
    plan = SweepPlan.from_dict(data["plan"])
    if config_hash(plan) != data["config_hash"]:
        raise ManifestError("config hash does not match the stored plan")
    result = epsilon_sweep(plan, workers=workers, processes=processes)
    summary = summary_csv(result)
    new_e = {repr(r.epsilon): {"mean": _hex(r.e_mean), "per_seed": [_hex(e) for e in r.e_per_seed]}
             for r in result.per_eps}
    report = {
        "e_values_match": new_e == data["e_values"],
        "slope_match": _hex(result.slope) == data.get("slope"),
        "summary_match": hashlib.sha256(summary.encode()).hexdigest() == data["summary_sha256"],
    }
    report["identical"] = all(report.values())
    if out_dir is not None:
        emit_manifest(result, out_dir)
    report["result"] = result
    return report
