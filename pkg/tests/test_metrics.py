import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from kinhydro.core import Grid1D, ModelParams, RunConfig, VelocityGrid, validate_config
from kinhydro.errors import DomainError, GridMismatch, MassMismatch, NonUnitMass, VGridTooNarrow
from kinhydro.fields import ForceModel
from kinhydro.kinetic import ParticleEnsemble, estimate_moments, init_well_prepared
from kinhydro.metrics import (COLUMNS, CHECK_NAMES, MetricRecord, coulomb_gap, dbl_allpairs_oracle,
                              dbl_atoms, dbl_distance, fluid_relative_entropy,
                              free_energy_and_dissipations, l1_maxwellian_gap,
                              moment_gap_checks, read_records, records_to_csv,
                              rel_entropy_pointwise, w1_atoms, w1_distance,
                              w1_matching_oracle, w1_transport_lp_oracle, write_records)


def unit_density(grid, rng, scale=0.5):
    rho = 1.0 + scale * rng.uniform(-1, 1, grid.n_cells)
    return rho / np.mean(rho)


# ---- pointwise relative entropy --------------------------------------------------

def _quad_oracle(a, b):
    val, _ = quad(lambda z: (a - z) / z, b, a, epsabs=1e-13, epsrel=1e-13, limit=500)
    return val


@pytest.mark.parametrize("a,b,expected", [(1.0, 1.0, 0.0),
                                          (2.0, 1.0, 2 * math.log(2) - 1),
                                          (1.0, 2.0, 1 - math.log(2))])
def test_rel_entropy_examples(a, b, expected):
    val = rel_entropy_pointwise(a, b)
    assert val == pytest.approx(expected, abs=1e-15)
    assert val == pytest.approx(_quad_oracle(a, b), abs=1e-12)


def test_rel_entropy_rounded_values():
    assert rel_entropy_pointwise(2.0, 1.0) == pytest.approx(0.386294, abs=1e-6)
    assert rel_entropy_pointwise(1.0, 2.0) == pytest.approx(0.306853, abs=1e-6)


def test_rel_entropy_domain():
    assert rel_entropy_pointwise(0.0, 0.7) == pytest.approx(0.7)
    for b in (0.0, -1.0, float("nan")):
        with pytest.raises(DomainError):
            rel_entropy_pointwise(1.0, b)
    with pytest.raises(DomainError):
        rel_entropy_pointwise(-0.1, 1.0)


@settings(max_examples=200)
@given(st.floats(0, 50), st.floats(1e-2, 50))
def test_rel_entropy_nonnegative_and_quad(a, b):
    val = rel_entropy_pointwise(a, b)
    assert val >= 0
    if a > 0:
        assert val == pytest.approx(_quad_oracle(a, b), abs=1e-9, rel=1e-9)
    if a == b:
        assert val == 0


# ---- fluid relative entropy -----------------------------------------------------

def test_identical_states_zero(grid64, rng):
    rho = unit_density(grid64, rng)
    u = rng.normal(size=64)
    for variant in ("isothermal", "pressureless"):
        val, comps = fluid_relative_entropy(rho, u, rho, u, grid64, variant)
        assert val == 0.0 and comps["E_hat"] == 0.0


def test_uniform_shift():
    grid = Grid1D(32)
    c = 0.37
    one = np.ones(32)
    e, comps = fluid_relative_entropy(one, np.full(32, c), one, np.zeros(32), grid, "isothermal")
    e_hat, _ = fluid_relative_entropy(one, np.full(32, c), one, np.zeros(32), grid, "pressureless")
    assert e == pytest.approx(c**2 / 2, abs=1e-15)
    assert e_hat == pytest.approx(c**2 / 2, abs=1e-15)
    assert comps["H_forward"] == 0.0


def test_fine_quadrature_oracle(rng):
    grid = Grid1D(64)
    rho_eps = np.full(64, 2.0 / 3.0)
    rho_eps[:16] = 2.0
    rho = np.ones(64)
    u_eps, u = rng.normal(size=64), rng.normal(size=64)
    val, comps = fluid_relative_entropy(rho_eps, u_eps, rho, u, grid, "isothermal")
    reps = 1_000_000 // 64
    a, b = np.repeat(rho_eps, reps), np.repeat(rho, reps)
    ua, ub = np.repeat(u_eps, reps), np.repeat(u, reps)
    h = a * np.log(a) - b * np.log(b) - (1 + np.log(b)) * (a - b)
    oracle = np.mean(0.5 * a * (ua - ub) ** 2 + h)
    assert abs(val - oracle) < 1e-9
    assert comps["est_l1"]["satisfied"]


def test_reverse_orientation_and_domain(grid64, rng):
    rho = unit_density(grid64, rng)
    rho_eps = rho.copy()
    rho_eps[5] = 0.0
    _, comps = fluid_relative_entropy(rho_eps, np.zeros(64), rho, np.zeros(64), grid64, "isothermal")
    assert comps["H_reverse"] is None and comps["H_forward"] > 0
    with pytest.raises(DomainError):
        fluid_relative_entropy(rho, np.zeros(64), rho_eps, np.zeros(64), grid64, "isothermal")
    with pytest.raises(GridMismatch):
        fluid_relative_entropy(rho[:32], np.zeros(32), rho, np.zeros(64), grid64, "isothermal")


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_entropy_chain_properties(seed):
    rng = np.random.default_rng(seed)
    grid = Grid1D(64)
    rho, rho_eps = unit_density(grid, rng, 0.9), unit_density(grid, rng, 0.9)
    u, u_eps = rng.normal(size=64), rng.normal(size=64)
    e, comps = fluid_relative_entropy(rho_eps, u_eps, rho, u, grid, "isothermal")
    assert comps["E_hat"] <= e
    assert min(e, comps["E_hat"], comps["H_forward"], comps["H_reverse"]) >= -1e-12
    assert comps["est_l1"]["satisfied"]


# ---- Coulomb gap -------------------------------------------------------------------

def test_coulomb_gap_single_mode():
    grid = Grid1D(128)
    rho = 1.0 + 0.5 * np.cos(2 * np.pi * grid.x)
    rho_eps = rho - np.cos(2 * np.pi * grid.x)
    lam = 0.7
    assert coulomb_gap(rho, rho, grid, lam) == 0.0
    assert coulomb_gap(rho_eps, rho, grid, lam) == pytest.approx(lam / (16 * np.pi**2), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_coulomb_gap_parseval(seed):
    rng = np.random.default_rng(seed)
    grid = Grid1D(128)
    rho, rho_eps = unit_density(grid, rng), unit_density(grid, rng)
    coef = np.fft.fft(rho - rho_eps) / grid.n_cells
    k = np.fft.fftfreq(grid.n_cells, d=1.0 / grid.n_cells)
    nz = (k != 0) & (np.abs(k) != grid.n_cells // 2)
    parseval = 0.5 * np.sum(np.abs(coef[nz]) ** 2 / (2 * np.pi * k[nz]) ** 2)
    assert abs(coulomb_gap(rho_eps, rho, grid) - parseval) < 1e-10


def test_coulomb_gap_needs_unit_mass(grid64):
    with pytest.raises(NonUnitMass):
        coulomb_gap(np.full(64, 1.1), np.ones(64), grid64)


# ---- transport distances --------------------------------------------------------------

def test_w1_dbl_two_atoms():
    assert w1_atoms([0.2], [1.0], [0.5], [1.0]) == pytest.approx(0.3, abs=1e-15)
    assert dbl_atoms([0.2], [1.0], [0.5], [1.0]) == pytest.approx(0.3, abs=1e-12)
    assert dbl_allpairs_oracle([0.2], [1.0], [0.5], [1.0]) == pytest.approx(0.3, abs=1e-12)
    assert w1_atoms([0.1], [1.0], [0.9], [1.0]) == pytest.approx(0.2, abs=1e-15)


def test_single_cell_densities():
    grid = Grid1D(64)
    a, b = np.zeros(64), np.zeros(64)
    a[10], b[40] = 1 / grid.h, 1 / grid.h
    expected = 30 * grid.h
    assert w1_distance(a, b, grid) == pytest.approx(expected, abs=1e-14)
    assert dbl_distance(a, b, grid) == pytest.approx(expected, abs=1e-12)
    assert w1_distance(a, a, grid) == 0.0 and dbl_distance(a, a, grid) == 0.0


def test_mass_mismatch(grid64):
    with pytest.raises(MassMismatch):
        w1_distance(np.ones(64), np.full(64, 1.01), grid64)
    with pytest.raises(MassMismatch):
        dbl_distance(np.ones(64), np.full(64, 1.01), grid64)


def test_random_atoms_against_oracles():
    rng = np.random.default_rng(2024)
    worst = 0.0
    for trial in range(100):
        n = int(rng.integers(1, 13))
        xa, xb = rng.uniform(0, 1, n), rng.uniform(0, 1, n)
        w = np.full(n, 1.0 / n)
        w1 = w1_atoms(xa, w, xb, w)
        dbl = dbl_atoms(xa, w, xb, w)
        worst = max(worst, abs(w1 - w1_matching_oracle(xa, xb)),
                    abs(w1 - w1_transport_lp_oracle(xa, w, xb, w)),
                    abs(dbl - dbl_allpairs_oracle(xa, w, xb, w)))
        assert dbl <= w1 + 1e-12
    assert worst < 1e-9


def test_random_weighted_atoms_against_oracles():
    rng = np.random.default_rng(77)
    for trial in range(100):
        na, nb = rng.integers(1, 13, size=2)
        xa, xb = rng.uniform(0, 1, na), rng.uniform(0, 1, nb)
        wa, wb = rng.uniform(0.1, 1, na), rng.uniform(0.1, 1, nb)
        wa, wb = wa / wa.sum(), wb / wb.sum()
        w1 = w1_atoms(xa, wa, xb, wb)
        dbl = dbl_atoms(xa, wa, xb, wb)
        assert abs(w1 - w1_transport_lp_oracle(xa, wa, xb, wb)) < 1e-9
        assert abs(dbl - dbl_allpairs_oracle(xa, wa, xb, wb)) < 1e-9
        assert dbl <= w1 + 1e-12


def test_integer_multiplicity_splitting():
    from kinhydro.metrics.transport import split_equal_mass
    xa, ca = np.array([0.1, 0.6]), np.array([2, 1])
    xb, cb = np.array([0.3, 0.9, 0.95]), np.array([1, 1, 1])
    ua, ub = split_equal_mass(xa, ca), split_equal_mass(xb, cb)
    assert w1_atoms(xa, ca / 3, xb, cb / 3) == pytest.approx(w1_matching_oracle(ua, ub), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_metric_axioms(seed):
    rng = np.random.default_rng(seed)
    grid = Grid1D(32)
    a, b, c = (rng.uniform(0, 2, 32) for _ in range(3))
    a, b, c = a / np.mean(a), b / np.mean(b), c / np.mean(c)
    for dist in (w1_distance, dbl_distance):
        ab, ba = dist(a, b, grid), dist(b, a, grid)
        assert ab >= -1e-12
        assert abs(ab - ba) < 1e-9
        assert dist(a, c, grid) <= ab + dist(b, c, grid) + 1e-9
    # the sup-norm cap never binds for unit mass on the unit torus
    assert abs(w1_distance(a, b, grid) - dbl_distance(a, b, grid)) < 1e-9


# ---- phase-space functionals ------------------------------------------------------------

def _gaussian_state(n, velocities=None, weight="zero"):
    cfg = validate_config(RunConfig(params=ModelParams.diffusive(1.0), grid=Grid1D(64),
                                    weight=weight))
    grid = cfg.grid
    ens = init_well_prepared(np.ones(64), np.zeros(64), n, 4, grid)
    if velocities is not None:
        ens = ParticleEnsemble(ens.positions, velocities(ens), ens.seed)
    fm = ForceModel.from_config(cfg)
    m = estimate_moments(ens, grid)
    return ens, m, fm.fields(m.rho, m.rho_u), cfg, fm


def test_free_energy_gaussian():
    ens, m, f, cfg, fm = _gaussian_state(1_000_000)
    out = free_energy_and_dissipations(ens, m, f, cfg.params, fm, VelocityGrid(), 64)
    assert out["free_energy"] == pytest.approx(0.5 - 0.5 * (1 + math.log(2 * math.pi)), abs=0.02)
    assert out["free_energy"] == pytest.approx(-0.918939, abs=0.02)
    assert out["D3"] == pytest.approx(1.0, abs=5e-3)


def test_d2_constant_kernel():
    ens, m, f, cfg, fm = _gaussian_state(200_000, weight="constant")
    out = free_energy_and_dissipations(ens, m, f, cfg.params, fm, VelocityGrid(), 64)
    v = ens.velocities
    assert out["D2"] == pytest.approx(np.mean(v**2) - np.mean(v) ** 2, abs=1e-10)
    assert out["D2"] == pytest.approx(1.0, abs=0.01)


def test_resting_particles_dissipate_nothing():
    ens, m, f, cfg, fm = _gaussian_state(1000, velocities=lambda e: np.zeros(e.n),
                                         weight="cosine")
    params = ModelParams.diffusionless(1.0)
    out = free_energy_and_dissipations(ens, m, f, params, fm, VelocityGrid(), 64)
    assert out["D3"] == 0.0 and out["D2"] == 0.0


def test_vgrid_too_narrow():
    ens, m, f, cfg, fm = _gaussian_state(10_000)
    with pytest.raises(VGridTooNarrow):
        free_energy_and_dissipations(ens, m, f, cfg.params, fm, VelocityGrid(-2.0, 2.0, 32), 64)


def _maxwellian_sample(shift=0.0):
    grid = Grid1D(64)
    rho = 1 + 0.3 * np.cos(2 * np.pi * grid.x)
    u = 0.2 * np.sin(2 * np.pi * grid.x)
    ens = init_well_prepared(rho, u + shift, 1_000_000, 8, grid)
    return ens, rho, u, grid


def test_maxwellian_gap_small_for_exact_sample():
    ens, rho, u, grid = _maxwellian_sample()
    out = l1_maxwellian_gap(ens, rho, u, grid, VelocityGrid(), 64)
    assert out["gap"] <= 0.05
    assert 0.999 <= out["m_mass"] <= 1.001
    assert out["bias_bound"] > 0


def test_maxwellian_gap_large_for_shifted_sample():
    ens, rho, u, grid = _maxwellian_sample(shift=3.0)
    out = l1_maxwellian_gap(ens, rho, np.zeros(64), grid, VelocityGrid(), 64)
    assert out["gap"] >= 1.5


# ---- moment-gap ledger ------------------------------------------------------------------

def test_moment_gaps_identical():
    grid = Grid1D(32)
    rng = np.random.default_rng(1)
    rho, u = unit_density(grid, rng), rng.normal(size=32)
    rows = moment_gap_checks(rho, u, rho, u, grid, with_entropy=True)
    assert [r.name for r in rows] == [n for n in CHECK_NAMES if n != "monokinetic"]
    for r in rows:
        assert r.lhs == 0.0 and r.satisfied


@pytest.mark.parametrize("nonuniform", [False, True])
def test_moment_gap_velocity_shift(nonuniform):
    grid = Grid1D(32)
    c = -0.4
    rho = 1 + 0.5 * np.cos(2 * np.pi * grid.x) if nonuniform else np.ones(32)
    u = 0.2 * np.sin(2 * np.pi * grid.x)
    row = moment_gap_checks(rho, u + c, rho, u, grid)[0]
    assert row.name == "l1_momentum"
    assert row.lhs == pytest.approx(abs(c) * grid.integrate(rho), rel=1e-12)
    # rhs first term sqrt(||rho|| int rho c^2) = |c| for unit mass; the L1 term vanishes
    assert row.rhs == pytest.approx(abs(c), rel=1e-12)
    if not nonuniform:
        assert row.lhs == pytest.approx(row.rhs, rel=1e-12)


def test_moment_gap_fuzz():
    rng = np.random.default_rng(99)
    grid = Grid1D(64)
    for trial in range(100):
        rho = unit_density(grid, rng, 0.8)
        u = 0.5 * np.sin(2 * np.pi * grid.x + rng.uniform(0, 6)) + rng.normal(scale=0.1, size=64)
        rho_eps = np.clip(rho + rng.normal(scale=0.2, size=64), 0.05, None)
        rho_eps /= np.mean(rho_eps)
        u_eps = u + rng.normal(scale=0.3, size=64)
        n = 2000
        ens = ParticleEnsemble(rng.uniform(0, 1, n), rng.normal(scale=0.5, size=n), 0)
        rows = moment_gap_checks(rho_eps, u_eps, rho, u, grid, ensemble=ens, with_entropy=True)
        assert {r.name for r in rows} == set(CHECK_NAMES)
        assert all(r.satisfied for r in rows), [r for r in rows if not r.satisfied]


# ---- records ------------------------------------------------------------------------

def test_record_csv_columns_and_nan(tmp_path):
    rec = MetricRecord(0.5, {"seed": 3, "free_energy": -0.9, "w1": float("nan"), "d_bl": None})
    text = records_to_csv([rec, MetricRecord(1.0, {"seed": 3})])
    header, row, _ = text.split("\n", 2)
    assert header.split(",") == list(COLUMNS)
    assert "nan" not in text.lower()
    fields = row.split(",")
    assert fields[COLUMNS.index("w1")] == ""
    assert fields[-1] == "non-finite:w1"
    path = write_records(tmp_path / "m.csv", [rec])
    back = read_records(path)
    assert back[0]["free_energy"] == -0.9 and back[0]["w1"] is None and back[0]["time"] == 0.5
    assert rec.free_energy == -0.9
