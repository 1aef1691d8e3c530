import numpy as np
import pytest

from conftest import term_insurance
from genthiele import backend
from genthiele.discrete import solve_reserves_discrete
from genthiele.duration import default_rates, disability_model, solve_disability
from genthiele.model import ACTIVE, disabled
from genthiele.simulator import simulate_disability_pv

pytestmark = pytest.mark.skipif("cython" not in backend.available(), reason="compiled kernels not built")


@pytest.fixture(scope="module")
def both():
    return backend.load("python"), backend.load("cython")


def test_backend_names(both):
    assert [k.BACKEND for k in both] == ["python", "cython"]


def test_discrete_sweep_parity(both):
    py, cy = (solve_reserves_discrete(term_insurance(), [0.3, 0.0], 0, 20, 1 / 120, backend=k) for k in both)
    np.testing.assert_array_equal(py.values, cy.values)


@pytest.mark.parametrize("keep", [True, False])
def test_disability_sweep_parity(both, keep):
    rates = default_rates(30)
    py, cy = (solve_disability(rates, 0.03, 67, 30, 1 / 24, keep_surface=keep, slice_onsets=(30, 50), backend=k)
              for k in both)
    np.testing.assert_array_equal(py.active, cy.active)
    np.testing.assert_array_equal(py.onset, cy.onset)
    if keep:
        np.testing.assert_array_equal(py.disabled, cy.disabled)
    for k in py.slices:
        np.testing.assert_array_equal(py.slices[k], cy.slices[k])


@pytest.mark.parametrize("x0", [ACTIVE, disabled(30.0), disabled(25.0)])
def test_simulation_parity(both, x0):
    prod = disability_model(default_rates(25), 0.03, 67, 25).fast_path
    py, cy = (simulate_disability_pv(prod, x0, 30.0, 9000, seed=123, backend=k, keep_pvs=True) for k in both)
    np.testing.assert_array_equal(py.pvs, cy.pvs)


def test_env_forces_fallback(monkeypatch):
    monkeypatch.setenv("GENTHIELE_PURE_PYTHON", "1")
    assert backend.load().BACKEND == "python"
    monkeypatch.delenv("GENTHIELE_PURE_PYTHON")
    assert backend.load().BACKEND == "cython"


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("GENTHIELE_MAX_WORKERS", "3")
    assert backend.max_workers() == 3
    monkeypatch.setenv("GENTHIELE_MAX_WORKERS", "0")
    assert backend.max_workers() == 1
