import numpy as np
import pytest

from kinhydro.core import Grid1D, ModelParams, RunConfig, validate_config


@pytest.fixture
def grid64():
    return Grid1D(64)


@pytest.fixture
def small_cfg():
    """A cheap paired run used by several harness tests."""
    return validate_config(RunConfig(
        params=ModelParams.diffusive(0.2, gamma=0.5, lam=1.0, alpha=1.0),
        grid=Grid1D(64), n_particles=20_000, dt=0.0125, t_final=0.05,
        interaction="kernel", weight="cosine", snapshot_stride=2, seed=7,
    ))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
