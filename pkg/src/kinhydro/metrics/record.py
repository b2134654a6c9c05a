"""Per-snapshot metric rows and their CSV form.

Column order is fixed by :data:`COLUMNS`.  Floats are written with ``repr`` so
that a row round-trips exactly.  A missing or non-finite value becomes an
empty field and its column name is appended to the ``error`` column; NaN never
reaches a file.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

from .moments import CHECK_NAMES, GapRow

BASE_COLUMNS = (
    "time", "seed", "step",
    "free_energy", "free_energy_floor", "D1_diag", "D2", "D3",
    "kinetic_energy", "int_local_alignment", "int_D2", "int_D3", "int_phi_mass",
    "energy_identity_residual",
    "rel_entropy_E", "H_forward", "H_reverse", "mod_kinetic_E_hat", "coulomb_gap",
    "dbl_phi_dissip", "int_gamma_term", "int_alpha_term",
    "d_bl", "w1", "l1_maxwellian", "l1_bias_bound", "l1_density_gap",
    "fluid_energy", "fluid_energy_residual", "fluid_max_grad_u", "fluid_mass",
    "kinetic_mass", "kinetic_momentum", "error_functional",
)
GAP_COLUMNS = tuple(f"{p}_{name}" for name in CHECK_NAMES for p in ("lhs", "rhs", "ok"))
COLUMNS = BASE_COLUMNS + GAP_COLUMNS + ("error",)


@dataclass
class MetricRecord:
    """Metrics at one shared snapshot time.

    ``values`` holds the scalar columns of :data:`BASE_COLUMNS` (absent keys
    are written empty); ``moment_gap_rows`` the inequality checks.
    """

    time: float
    values: dict = field(default_factory=dict)
    moment_gap_rows: list = field(default_factory=list)
    error: str = ""

    def __getattr__(self, name):
        values = self.__dict__.get("values", {})
        if name in values:
            return values[name]
        raise AttributeError(name)

    def gap(self, name: str) -> GapRow | None:
        for row in self.moment_gap_rows:
            if row.name == name:
                return row
        return None

    def violations(self) -> list[GapRow]:
        return [r for r in self.moment_gap_rows if not r.satisfied]

    def to_row(self) -> list[str]:
        out, bad = [], []
        data = dict(self.values)
        data["time"] = self.time
        for row in self.moment_gap_rows:
            data[f"lhs_{row.name}"] = row.lhs
            data[f"rhs_{row.name}"] = row.rhs
            data[f"ok_{row.name}"] = int(row.satisfied)
        for col in COLUMNS[:-1]:
            val = data.get(col)
            if val is None:
                out.append("")
            elif isinstance(val, bool):
                out.append(str(int(val)))
            elif isinstance(val, int):
                out.append(str(val))
            else:
                val = float(val)
                if math.isfinite(val):
                    out.append(repr(val))
                else:
                    out.append("")
                    bad.append(col)
        err = self.error
        if bad:
            err = ";".join(filter(None, [err, "non-finite:" + ",".join(bad)]))
        out.append(err)
        return out


def records_to_csv(records) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        w.writerow(rec.to_row())
    return buf.getvalue()


def write_records(path: str | Path, records) -> Path:
    path = Path(path)
    path.write_text(records_to_csv(records))
    return path


def read_records(path: str | Path) -> list[dict]:
    """Read a metrics CSV back as dicts of floats (empty fields become None)."""
    with Path(path).open(newline="") as fh:
        rows = []
        for raw in csv.DictReader(fh):
            row = {}
            for k, v in raw.items():
                if k == "error":
                    row[k] = v
                else:
                    row[k] = float(v) if v != "" else None
            rows.append(row)
    return rows
