"""Polarisation build-up of a discrete nuclear bath driven by repeated NV resets."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .hyperfine import DomainError


class IntegrationError(RuntimeError):
    pass


@dataclass(frozen=True)
class DynamicsConfig:
    gamma1: float = 0.0
    include_hf_diffusion: bool = False
    dipolar_rates: np.ndarray | None = None
    rtol: float = 1e-10
    atol: float = 1e-14

    def __post_init__(self):
        if self.gamma1 < 0:
            raise DomainError("gamma1 must be nonnegative")
        if self.dipolar_rates is not None:
            D = np.asarray(self.dipolar_rates, dtype=float)
            if not np.allclose(D, D.T) or np.any(D < 0):
                raise DomainError("dipolar rate matrix must be symmetric and nonnegative")


def _weights(lam):
    lam = np.asarray(lam, dtype=float)
    L2 = np.sum(lam**2)
    return lam**2 / L2, L2


def polarization_step(P, lam) -> np.ndarray:
    """One interaction window tau = pi / Lambda of the reset-and-exchange map."""
    P = np.asarray(P, dtype=float)
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0 or not np.any(lam):
        return P.copy()
    w, _ = _weights(lam)
    diff = P[:, None] - P[None, :]
    return P - (P + 0.5) * w - (w[:, None] * w[None, :] * diff).sum(axis=1)


def cooling_rates(lam) -> np.ndarray:
    """u_j = Lambda_j^2 / (pi Lambda)."""
    lam = np.asarray(lam, dtype=float)
    if lam.size == 0:
        return lam.copy()
    L = np.sqrt(np.sum(lam**2))
    if L == 0:
        raise DomainError("total coupling must be positive")
    return lam**2 / (np.pi * L)


def hf_diffusion_matrix(lam) -> np.ndarray:
    """D_A^{jk} = Lambda_j^2 Lambda_k^2 / (pi Lambda^3): the per-window exchange spread over tau."""
    lam = np.asarray(lam, dtype=float)
    L = np.sqrt(np.sum(lam**2))
    D = np.outer(lam**2, lam**2) / (np.pi * L**3)
    np.fill_diagonal(D, 0.0)
    return D


def rate_matrix(lam, cfg: DynamicsConfig):
    """Linear system dP/dt = M P + c for the bath equations."""
    u = cooling_rates(lam)
    n = len(u)
    D = np.zeros((n, n))
    if cfg.include_hf_diffusion:
        D += hf_diffusion_matrix(lam)
    if cfg.dipolar_rates is not None:
        D += np.asarray(cfg.dipolar_rates, dtype=float)
    np.fill_diagonal(D, 0.0)
    M = D - np.diag(u + cfg.gamma1 + D.sum(axis=1))
    return M, -0.5 * u


def integrate_bath(P0, lam, cfg: DynamicsConfig = DynamicsConfig(), t_grid=None, method="Radau"):
    """Integrate the bath rate equations on ``t_grid``; returns an array (len(t), n).

    Radau IIA (implicit, adaptive, fifth order) with the exact Jacobian is the
    default because cooling rates within one bath routinely span four or more
    decades. Any other ``solve_ivp`` method name can be passed. Trajectories
    leaving [-1/2, 1/2] by more than 1e-9 are reported as an integration failure.
    """
    P0 = np.asarray(P0, dtype=float)
    if np.any(np.abs(P0) > 0.5):
        raise DomainError("initial polarisations must lie in [-1/2, 1/2]")
    t = np.asarray(t_grid, dtype=float)
    M, c = rate_matrix(lam, cfg)
    kw = {"jac": M} if method in ("Radau", "BDF", "LSODA") else {}
    # One call per output interval: values then come from accepted steps, not
    # from the dense-output interpolant, whose error is not controlled and
    # reaches ~1e-7 once the steps grow long near saturation.
    Y = np.empty((len(t), P0.size))
    Y[0] = P0
    for k in range(1, len(t)):
        sol = solve_ivp(lambda _t, P: M @ P + c, (t[k - 1], t[k]), Y[k - 1], method=method,
                        rtol=cfg.rtol, atol=cfg.atol, **kw)
        if not sol.success:
            raise IntegrationError(f"integration failed near t={t[k - 1]:.6g}: {sol.message} (nfev={sol.nfev})")
        Y[k] = sol.y[:, -1]
    if np.any(np.abs(Y) > 0.5 + 1e-9):
        worst = float(np.abs(Y).max())
        raise IntegrationError(f"trajectory left the physical range, max |P| = {worst:.12g}")
    return np.clip(Y, -0.5, 0.5)


def steady_state(lam, cfg: DynamicsConfig = DynamicsConfig()) -> np.ndarray:
    M, c = rate_matrix(lam, cfg)
    return np.linalg.solve(M, -c)


def analytic_saturation(t, P0, u, gamma1):
    """Closed-form exponential saturation of an isolated spin."""
    t = np.asarray(t, dtype=float)
    u = np.asarray(u, dtype=float)
    if np.any(u < 0) or gamma1 < 0:
        raise DomainError("rates must be nonnegative")
    k = gamma1 + u
    e = np.exp(-t * k)
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(k > 0, u / np.where(k > 0, k, 1.0), 0.0)
    return P0 * e - 0.5 * ratio * (1 - e)


def nv_signal_decay(t, lambda_total):
    """Probability lost from the NV initial state, 1 - exp(-Lambda t / pi)."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("t must be nonnegative")
    return -np.expm1(-lambda_total * t / np.pi)
