"""Command line entry point.

Exit codes: 0 ok, 2 configuration error, 3 numerical failure,
4 acceptance threshold missed (``sweep --assert``) or replay mismatch.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np
from scipy.integrate import quad

from ..core import config_to_dict, load_config
from ..errors import ConfigError, NumericalError
from ..metrics.entropy import rel_entropy_pointwise
from ..metrics.record import write_records
from ..metrics.transport import (dbl_allpairs_oracle, dbl_atoms, w1_atoms,
                                 w1_transport_lp_oracle)
from .manifest import ManifestError, emit_manifest, replay
from .pair import dump_particles, run_pair
from .sweep import SweepPlan, epsilon_sweep

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_THRESHOLD = 0, 2, 3, 4
SLOPE_THRESHOLD = 0.4


def _floats(text: str) -> np.ndarray:
    return np.array([float(t) for t in text.split(",") if t.strip()])


def _load_plan(path: str) -> SweepPlan:
    try:
        raw = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError([(path, f"invalid JSON: {exc}")]) from exc
    return SweepPlan.from_dict(raw)


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(json.dumps(config_to_dict(cfg), indent=2))
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    keep = cfg.dump_particles != "none"
    result = run_pair(cfg, workers=args.threads, keep_snapshots=keep)
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = write_records(out / "metrics.csv", result.records)
    dump_particles(result, out)
    last = result.records[-1].values
    print(f"wrote {path} ({len(result.records)} snapshots)")
    print(f"sup error functional: {max(r.values['error_functional'] for r in result.records):.6e}")
    print(f"final d_BL: {last['d_bl']:.6e}  gap violations: "
          f"{sum(len(r.violations()) for r in result.records)}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    plan = _load_plan(args.plan)
    result = epsilon_sweep(plan, workers=args.threads, processes=args.processes)
    out = Path(args.out or plan.base.output_dir)
    manifest = emit_manifest(result, out)
    for r in result.per_eps:
        print(f"epsilon={r.epsilon:<6g} e={r.e_mean:.6e} spread={r.e_spread:.2e}")
    print(f"slope={result.slope:.4f} intercept={result.intercept:.4f}")
    print(f"manifest: {manifest}")
    if args.assert_:
        ok = (result.slope >= SLOPE_THRESHOLD and result.monotone()
              and result.gap_violations == 0 and result.free_energy_ok)
        print("acceptance:", "PASS" if ok else "FAIL")
        if not ok:
            return EXIT_THRESHOLD
    return EXIT_OK


def cmd_replay(args) -> int:
    report = replay(args.manifest, out_dir=args.out, workers=args.threads,
                    processes=args.processes)
    for key in ("e_values_match", "slope_match", "summary_match"):
        print(f"{key}: {report[key]}")
    return EXIT_OK if report["identical"] else EXIT_THRESHOLD


def cmd_oracle(args) -> int:
    if args.metric == "entropy":
        a, b = args.a, args.b
        fast = rel_entropy_pointwise(a, b)
        slow, _ = quad(lambda z: (a - z) / z, b, a, epsabs=1e-14, epsrel=1e-14) if a > 0 else (b, 0)
        print(json.dumps({"formula": fast, "quadrature": slow}))
        return EXIT_OK
    xa, xb = _floats(args.xa), _floats(args.xb)
    wa = _floats(args.wa) if args.wa else np.full(len(xa), 1.0 / len(xa))
    wb = _floats(args.wb) if args.wb else np.full(len(xb), 1.0 / len(xb))
    if args.metric == "w1":
        out = {"fast": w1_atoms(xa, wa, xb, wb), "oracle": w1_transport_lp_oracle(xa, wa, xb, wb)}
    else:
        out = {"fast": dbl_atoms(xa, wa, xb, wb), "oracle": dbl_allpairs_oracle(xa, wa, xb, wb)}
    print(json.dumps(out))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kinhydro", description=__doc__.splitlines()[0])
    p.add_argument("--threads", type=int, default=1, help="worker threads per particle run")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="verb", required=True)

    s = sub.add_parser("validate", help="check a run config and print it normalized")
    s.add_argument("config")
    s.set_defaults(fn=cmd_validate)

    s = sub.add_parser("run", help="paired kinetic/fluid run with metrics CSV")
    s.add_argument("config")
    s.add_argument("--out", help="output directory (default: config output_dir)")
    s.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="epsilon sweep from a plan JSON")
    s.add_argument("plan")
    s.add_argument("--out")
    s.add_argument("--processes", type=int, default=1)
    s.add_argument("--assert", dest="assert_", action="store_true",
                   help=f"exit 4 unless slope >= {SLOPE_THRESHOLD}, e monotone within 10%%, "
                        "no inequality violations and the free-energy bound holds")
    s.set_defaults(fn=cmd_sweep)

    s = sub.add_parser("replay", help="re-run a manifest and compare bitwise")
    s.add_argument("manifest")
    s.add_argument("--out")
    s.add_argument("--processes", type=int, default=1)
    s.set_defaults(fn=cmd_replay)

    s = sub.add_parser("oracle", help="brute-force reference values")
    osub = s.add_subparsers(dest="metric", required=True)
    for name in ("w1", "dbl"):
        o = osub.add_parser(name)
        o.add_argument("--xa", required=True, help="comma-separated positions in [0,1)")
        o.add_argument("--xb", required=True)
        o.add_argument("--wa", help="comma-separated masses (default uniform)")
        o.add_argument("--wb")
    o = osub.add_parser("entropy")
    o.add_argument("a", type=float)
    o.add_argument("b", type=float)
    s.set_defaults(fn=cmd_oracle)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, ManifestError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except FileNotFoundError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
