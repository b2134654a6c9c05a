"""Functionals comparing kinetic and fluid solutions."""

from .entropy import (coulomb_gap, est_l1_check, fluid_relative_entropy,
                      modulated_kinetic_energy, phi_weighted_dissipation,
                      rel_entropy_pointwise, relative_entropy_integral)
from .moments import CHECK_NAMES, GapRow, moment_gap_checks, monokinetic_coupling
from .phase import (free_energy_and_dissipations, free_energy_floor, l1_maxwellian_gap,
                    maxwellian_on_bins, phase_histogram)
from .record import COLUMNS, MetricRecord, read_records, records_to_csv, write_records
from .transport import (dbl_allpairs_oracle, dbl_atoms, dbl_distance, dbl_signed,
                        w1_atoms, w1_distance, w1_matching_oracle, w1_transport_lp_oracle)

__all__ = [
    "CHECK_NAMES", "COLUMNS", "GapRow", "MetricRecord",
    "coulomb_gap", "dbl_allpairs_oracle", "dbl_atoms", "dbl_distance", "dbl_signed",
    "est_l1_check", "fluid_relative_entropy", "free_energy_and_dissipations",
    "free_energy_floor", "l1_maxwellian_gap", "maxwellian_on_bins",
    "modulated_kinetic_energy", "moment_gap_checks", "monokinetic_coupling",
    "phase_histogram", "phi_weighted_dissipation", "read_records", "records_to_csv",
    "rel_entropy_pointwise", "relative_entropy_integral", "w1_atoms", "w1_distance",
    "w1_matching_oracle", "w1_transport_lp_oracle", "write_records",
]
