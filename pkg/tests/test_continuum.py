import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from nvdnp.continuum import (
    ContinuumParams,
    GridSpec,
    dipole_diffusion,
    dwell_attenuation,
    eta,
    lambda_sq_field,
    lambda_sq_rotated,
    loglog_slope,
    motion_model,
    pointwise_yield,
    solve_steady_state,
    target_dephasing,
    total_sq_integral,
    transient,
)
from nvdnp.hyperfine import A_EH, DomainError

P = ContinuumParams()


def test_dipolar_diffusion_frozen():
    # gamma_H^2 mu0 n^(1/3) hbar / (24 pi) at n = 56 nm^-3, evaluated in SI by hand
    n = 56e27
    ref = 2.6752218744e8**2 * 1.25663706212e-6 * n ** (1 / 3) * 1.054571817e-34 / (24 * np.pi) * 1e18
    assert dipole_diffusion(56.0) == pytest.approx(ref, rel=1e-12)
    assert dipole_diffusion(56.0) == pytest.approx(481.2535, rel=1e-6)


@given(st.floats(0, 1e3), st.floats(0.5, 50), st.floats(1e-3, 1e9))
def test_motional_product_is_eight(h, d, D):
    tau, g = motion_model(h, d, D)
    assert g * tau == pytest.approx(8.0, rel=1e-12)


def test_dwell_attenuation_limits():
    assert dwell_attenuation(0.0, 1.0) == 0.0
    assert dwell_attenuation(1.0, 1.0) == 0.5
    assert dwell_attenuation(1e6, 1.0) == pytest.approx(1.0)


@pytest.mark.parametrize("alpha", [0.0, 25.0, 60.0, 90.0])
def test_surface_dephasing_vs_plane_integral(alpha):
    """Closed form against a direct second-moment integral over the surface layer."""
    h, sigma = 1.3, 0.1
    b = np.array([np.sin(np.deg2rad(alpha)), 0, np.cos(np.deg2rad(alpha))])

    def f(r, phi):
        R = np.array([r * np.cos(phi), r * np.sin(phi), h])
        Rn = np.linalg.norm(R)
        c = b @ R / Rn
        return r * (3 * c * c - 1) ** 2 / Rn**6

    m2, _ = integrate.dblquad(f, 0, 2 * np.pi, 0, 400 * h, epsabs=1e-12)
    assert target_dephasing(h, alpha, sigma) == pytest.approx(A_EH * np.sqrt(sigma * m2), rel=1e-6)


def test_surface_dephasing_clamps_with_warning():
    with pytest.warns(UserWarning):
        g = target_dephasing(np.array([0.05, 1.0]), 0.0, 0.1, h_min=0.2)
    assert g[0] == pytest.approx(target_dephasing(0.2))
    with pytest.raises(DomainError):
        target_dephasing(0.0)


def test_half_space_integral_vs_cylindrical_quadrature():
    """Angular-moment shortcut against plain integration of Lambda^2 over the target volume."""
    p = ContinuumParams(h_min=0.2)
    z0 = p.d + p.h_min
    for scheme, al in (("HH", 0.0), ("CRb", 0.0)):
        def f(rho, z):
            return 2 * np.pi * rho * lambda_sq_rotated(scheme, rho, 0.0, z - p.d, p.d, al)

        val, _ = integrate.dblquad(f, z0, np.inf, 0, np.inf, epsabs=0, epsrel=1e-10)
        assert total_sq_integral(scheme, al, p) == pytest.approx(p.n_p * val, rel=1e-6)


def test_eta_reference_and_optima():
    assert eta("HH", 90.0) == pytest.approx(1.0)
    assert eta("CRa", 90.0) > eta("CRa", 0.0)
    assert eta("HH", 0.0) > eta("HH", 90.0)


@pytest.mark.parametrize("scheme", ["HH", "PulsePol"])
def test_closed_forms_match_rotated_law(scheme):
    x, y, h = np.meshgrid([0.0, 1.3, -4.0], [0.0, 2.2, -0.7], [0.2, 3.0], indexing="ij")
    closed = lambda_sq_field(scheme, x, y, h, 5.0)
    rot = lambda_sq_rotated(scheme, x, y, h, 5.0, 0.0)
    assert np.allclose(closed, rot, rtol=1e-10, atol=0)


def test_pulsed_attenuation_applies_only_to_pulsed():
    x, y, h = 1.0, 2.0, 0.5
    assert lambda_sq_field("HH", x, y, h, 5.0, tau_d=1e-9, tau_p=1e-6) == lambda_sq_field("HH", x, y, h, 5.0)
    pp = lambda_sq_field("PulsePol", x, y, h, 5.0, tau_d=1e-6, tau_p=1e-6)
    assert pp == pytest.approx(0.5 * lambda_sq_field("PulsePol", x, y, h, 5.0))


def small_grid(D):
    return GridSpec(120.0, P.d / 3, 1.3, True, 2 * P.d)


def test_symmetry_reduction_matches_full_domain():
    D = 50.0
    q = solve_steady_state("CRa", P, D, small_grid(D))
    g = small_grid(D)
    full = solve_steady_state("CRa", P, D, GridSpec(g.L, g.spacing, g.grading, False, g.uniform_extent))
    assert q.P_inf == pytest.approx(full.P_inf, rel=1e-8)


def test_transient_relaxes_to_steady_state():
    D = 20.0
    steady = solve_steady_state("HH", P, D, small_grid(D)).P_inf
    late = transient("HH", P, D, 30 * P.T1T, n_steps=300, grid=small_grid(D))
    assert late == pytest.approx(steady, rel=1e-6)


def test_pointwise_limit_at_small_diffusion():
    D = 1e-3
    assert pointwise_yield("CRa", P, D, small_grid(D)) == pytest.approx(
        solve_steady_state("CRa", P, D, small_grid(D)).P_inf, rel=0.01)


def test_yield_linear_in_density():
    D = 100.0
    a = solve_steady_state("CRa", P, D, small_grid(D)).P_inf
    b = solve_steady_state("CRa", ContinuumParams(n_p=2 * P.n_p), D, small_grid(D)).P_inf
    assert b == pytest.approx(2 * a, rel=1e-9)


def test_longer_T1_never_lowers_yield():
    D = 100.0
    a = solve_steady_state("HH", P, D, small_grid(D)).P_inf
    b = solve_steady_state("HH", ContinuumParams(T1T=3.0), D, small_grid(D)).P_inf
    assert b > a


def test_guards():
    with pytest.raises(DomainError, match="d/3"):
        solve_steady_state("CRa", P, 10.0, GridSpec(100.0, 2.0))
    with pytest.raises(DomainError):
        solve_steady_state("CRa", P, 0.0)
    with pytest.raises(DomainError):
        ContinuumParams(d=-1)


def test_loglog_slope_exact():
    D = np.logspace(0, 3, 7)
    assert loglog_slope(D, 4 * D**-2.5) == pytest.approx(-2.5)


@pytest.mark.slow
def test_grid_convergence_at_operating_point():
    D = dipole_diffusion(P.n_p)
    base = solve_steady_state("CRa", P, D).P_inf
    fine = solve_steady_state("CRa", P, D, GridSpec.default(D, P, refine=2.0)).P_inf
    assert abs(fine / base - 1) < 0.05
