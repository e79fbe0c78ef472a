import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nvdnp.dynamics import (
    DynamicsConfig,
    IntegrationError,
    analytic_saturation,
    cooling_rates,
    hf_diffusion_matrix,
    integrate_bath,
    nv_signal_decay,
    polarization_step,
    rate_matrix,
    steady_state,
)
from nvdnp.hyperfine import DomainError

lams = st.lists(st.floats(1.0, 1e4), min_size=1, max_size=12).map(np.array)


@given(lams, st.floats(-0.5, 0.5))
def test_map_stays_physical(lam, p0):
    P = np.full(lam.size, p0)
    for _ in range(20):
        P = polarization_step(P, lam)
        assert np.all(P >= -0.5 - 1e-12) and np.all(P <= 0.5 + 1e-12)


@given(lams)
def test_map_fixed_point(lam):
    P = np.full(lam.size, -0.5)
    assert np.allclose(polarization_step(P, lam), P)


def test_single_spin_map_is_full_transfer():
    # one nucleus, tau = pi / Lambda: a complete swap
    assert polarization_step(np.array([0.5]), np.array([3.0])) == pytest.approx([-0.5])


def test_cooling_rates_sum():
    lam = np.array([1.0, 2.0, 2.0])
    u = cooling_rates(lam)
    assert u.sum() == pytest.approx(3.0 / np.pi)


def test_hf_matrix_symmetric_zero_diag():
    D = hf_diffusion_matrix(np.array([1.0, 3.0, 0.5]))
    assert np.allclose(D, D.T)
    assert np.all(np.diag(D) == 0)


@settings(max_examples=25, deadline=None)
@given(lams, st.floats(0, 50))
def test_integrator_vs_closed_form(lam, g1):
    """DOP853 trajectory and the independent exponential solution."""
    u = cooling_rates(lam)
    t = np.linspace(0, 5 / u.min(), 30)
    P = integrate_bath(np.zeros(lam.size), lam, DynamicsConfig(gamma1=g1), t)
    ref = analytic_saturation(t[:, None], 0.0, u[None, :], g1)
    assert np.max(np.abs(P - ref)) <= 1e-7 * 0.5


def test_steady_state_closed_form():
    lam = np.array([100.0, 40.0, 7.0])
    g1 = 3.0
    u = cooling_rates(lam)
    Pss = steady_state(lam, DynamicsConfig(gamma1=g1))
    assert np.allclose(Pss, -0.5 * u / (u + g1), rtol=1e-12)


def test_exchange_conserves_total_without_pumping():
    lam = np.array([5.0, 2.0, 1.0])
    M, _ = rate_matrix(lam, DynamicsConfig(include_hf_diffusion=True))
    D = hf_diffusion_matrix(lam)
    # the exchange part alone has zero column sums
    exch = M + np.diag(cooling_rates(lam))
    assert np.allclose(exch.sum(axis=0), 0)
    assert np.allclose(exch - np.diag(np.diag(exch)), D)


def test_hf_diffusion_bends_trajectories():
    lam = np.array([50.0, 5.0, 1.0])
    t = np.linspace(0, 2.0, 40)
    plain = integrate_bath(np.zeros(3), lam, DynamicsConfig(), t)
    mixed = integrate_bath(np.zeros(3), lam, DynamicsConfig(include_hf_diffusion=True), t)
    assert np.max(np.abs(plain - mixed)) > 1e-3
    # weakly coupled spin gains from its neighbours
    assert mixed[-1, 2] < plain[-1, 2]


def test_dipolar_matrix_validation():
    with pytest.raises(DomainError):
        DynamicsConfig(dipolar_rates=np.array([[0, 1.0], [2.0, 0]]))
    with pytest.raises(DomainError):
        DynamicsConfig(gamma1=-1)


def test_bad_initial_state():
    with pytest.raises(DomainError):
        integrate_bath([0.6], [1.0], t_grid=[0, 1])


def test_solver_failure_is_reported(monkeypatch):
    import nvdnp.dynamics as dyn

    class Failed:
        success = False
        message = "step size underflow"
        nfev = 12

    monkeypatch.setattr(dyn, "solve_ivp", lambda *a, **k: Failed())
    with pytest.raises(IntegrationError, match="step size underflow"):
        integrate_bath(np.zeros(2), np.array([1.0, 2.0]), t_grid=np.linspace(0, 1, 3))


def test_nv_decay():
    t = np.array([0.0, np.pi, 1e9])
    assert np.allclose(nv_signal_decay(t, 1.0), [0, 1 - np.exp(-1), 1])
    with pytest.raises(DomainError):
        nv_signal_decay(-1.0, 1.0)
