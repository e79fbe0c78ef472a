"""External target ensemble above a shallow NV: coupling fields, dephasing and steady-state yield.

Geometry: the diamond surface is the plane z = 0 seen from the target side,
the NV sits a depth ``d`` below it, and a target point at height ``h`` above
the surface is at separation (x, y, d + h) from the NV. Lengths in nm,
rates in rad/s, diffusion coefficients in nm^2/s.
"""
from __future__ import annotations

import time
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hyperfine import (
    A_EH,
    GAMMA_H,
    HBAR,
    MU0,
    PROTON,
    DomainError,
    Scheme,
    SpinSpecies,
    cr_resonance_field,
    lambda_scheme,
)

PP_FACTOR_SQ = 4 * (6 + 4 * np.sqrt(2)) / (9 * np.pi**2)

DEFAULT_GAMMA_NV = {
    Scheme.CRa: 1e6,  # T2* = 1 us
    Scheme.CRb: 1e6,
    Scheme.HH: 5e5,  # T1rho = 2 us
    Scheme.PolCPMG: 5e4,
    Scheme.PulsePol: 5e4,  # T2 = 20 us
}
OPTIMAL_ALPHA = {Scheme.CRa: 90.0, Scheme.CRb: 0.0, Scheme.HH: 0.0, Scheme.PolCPMG: 0.0,
                 Scheme.PulsePol: 0.0}


class NonConvergence(RuntimeError):
    pass


def default_omega_T() -> float:
    """Proton Larmor frequency at the upper cross-relaxation field."""
    return GAMMA_H * cr_resonance_field(PROTON, "a")


@dataclass
class ContinuumParams:
    d: float = 5.0
    alpha: float | None = None  # deg; None picks the scheme optimum
    n_p: float = 56.0
    sigma_surf: float = 0.1
    T1T: float = 1.0
    gamma_nv: dict = field(default_factory=lambda: {s.value: g for s, g in DEFAULT_GAMMA_NV.items()})
    D_sp: float = 0.0
    omega_T: float = field(default_factory=default_omega_T)
    h_min: float = 0.2
    a: float = A_EH
    cra_form: str = "closed"  # or "rotated"

    def __post_init__(self):
        if self.d <= 0:
            raise DomainError("NV depth d must be positive")
        if self.n_p < 0 or self.sigma_surf < 0:
            raise DomainError("densities must be nonnegative")
        if self.T1T <= 0:
            raise DomainError("T1T must be positive")
        if self.h_min <= 0:
            raise DomainError("h_min must be positive")
        if self.cra_form not in ("closed", "rotated"):
            raise DomainError("cra_form must be 'closed' or 'rotated'")

    @property
    def gamma1(self) -> float:
        return 1 / self.T1T

    @property
    def tau_p(self) -> float:
        return 3 * np.pi / self.omega_T

    def alpha_for(self, scheme) -> float:
        s = Scheme.parse(scheme)
        return OPTIMAL_ALPHA[s] if self.alpha is None else float(self.alpha)

    def gamma_nv_for(self, scheme) -> float:
        s = Scheme.parse(scheme)
        return float(self.gamma_nv.get(s.value, DEFAULT_GAMMA_NV[s]))

    def as_dict(self) -> dict:
        return asdict(self)


# ----------------------------------------------------------------- fields

def dwell_attenuation(tau_d, tau_p):
    tau_d = np.asarray(tau_d, dtype=float)
    return tau_d**2 / (tau_d**2 + tau_p**2)


def lambda_sq_rotated(scheme, x, y, h, d, alpha_deg, a=A_EH):
    """Squared coupling with the NV axis tilted by alpha from the surface normal (in the xz plane)."""
    al = np.deg2rad(alpha_deg)
    z = d + np.asarray(h, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    R = np.sqrt(x * x + y * y + z * z)
    c = (np.sin(al) * x + np.cos(al) * z) / R
    return lambda_scheme(scheme, R, np.arccos(np.clip(c, -1, 1)), a) ** 2


def lambda_sq_field(scheme, x, y, h, d, a=A_EH, tau_d=None, tau_p=None, form="closed"):
    """Closed-form squared coupling at the optimal NV orientation of each scheme.

    CRa takes the NV axis in the surface plane along x; HH and PulsePol take
    it along the surface normal. ``form='rotated'`` evaluates the general
    angular law at the same orientation instead. Pulsed schemes are scaled by
    the dwell attenuation when ``tau_d`` is given.
    """
    s = Scheme.parse(scheme)
    if np.any(np.asarray(h) < 0) or d <= 0:
        raise DomainError("need h >= 0 and d > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    z = d + np.asarray(h, dtype=float)
    rho = z * z + x * x + y * y
    if form == "rotated" or s in (Scheme.CRb, Scheme.PolCPMG):
        out = lambda_sq_rotated(s, x, y, h, d, OPTIMAL_ALPHA[s], a)
    elif s is Scheme.CRa:
        out = 9 * a * a * (z * z - y * y) ** 2 / (2 * rho**5)
    else:
        out = 9 * a * a * z * z * (x * x + y * y) / (4 * rho**5)
        if s is Scheme.PulsePol:
            out = PP_FACTOR_SQ * out
    if s.pulsed and tau_d is not None:
        if tau_p is None:
            raise DomainError("pulsed attenuation needs tau_p")
        out = out * dwell_attenuation(tau_d, tau_p)
    return out


_U, _WU = np.polynomial.legendre.leggauss(96)
_U = 0.5 * (_U + 1)
_WU = 0.5 * _WU


def total_sq_integral(scheme, alpha_deg, params: ContinuumParams = None, n_phi: int = 256) -> float:
    """Integral of n_p Lambda^2 over the half-space above h_min (static, no dwell factor).

    Uses int_{z > z0} f(R_hat) / R^6 d^3R = (1 / 3 z0^3) int_{u > 0} f u^3 dOmega
    with u the cosine to the surface normal.
    """
    params = params or ContinuumParams()
    if not -90 <= alpha_deg <= 90:
        raise DomainError("alpha must lie in [-90, 90] degrees")
    s = Scheme.parse(scheme)
    phi = np.arange(n_phi) * 2 * np.pi / n_phi
    U, PH = np.meshgrid(_U, phi, indexing="ij")
    S = np.sqrt(1 - U * U)
    al = np.deg2rad(alpha_deg)
    c = np.sin(al) * S * np.cos(PH) + np.cos(al) * U
    f = lambda_scheme(s, 1.0, np.arccos(np.clip(c, -1, 1)), 1.0) ** 2
    ang = np.sum(_WU[:, None] * f * U**3) * (2 * np.pi / n_phi)
    z0 = params.d + params.h_min
    return params.n_p * params.a**2 * ang / (3 * z0**3)


def eta(scheme, alpha_deg, params: ContinuumParams = None) -> float:
    """Total squared field relative to HH with the NV axis in the surface plane."""
    return total_sq_integral(scheme, alpha_deg, params) / total_sq_integral(Scheme.HH, 90.0, params)


def target_dephasing(h, alpha_deg=0.0, sigma_surf=0.1, a=A_EH, h_min=None):
    """Dephasing of a target nucleus at height h by a random surface electron layer."""
    h = np.asarray(h, dtype=float)
    if h_min is not None and np.any(h < h_min):
        warnings.warn(f"heights below h_min={h_min} nm clamped", stacklevel=2)
        h = np.maximum(h, h_min)
    if np.any(h <= 0):
        raise DomainError("target dephasing diverges at h = 0")
    al = np.deg2rad(alpha_deg)
    radical = np.sqrt(20 * np.cos(2 * al) + 3 * np.cos(4 * al) + 41)
    return a * np.sqrt(3 * np.pi * sigma_surf) / (16 * h * h) * radical


def motion_model(h, d, D_total):
    """Dwell time (s) near the NV and the matching motional dephasing rate 8 / tau_d."""
    if np.any(np.asarray(D_total) <= 0):
        raise DomainError("diffusion coefficient must be positive")
    tau_d = (np.asarray(h, dtype=float) + d) ** 2 / (6 * D_total)
    return tau_d, 8 / tau_d


def dipole_diffusion(n_p: float = 56.0, species: SpinSpecies = PROTON) -> float:
    """Dipolar spin-diffusion coefficient gamma^2 mu0 n^(1/3) hbar / 24 pi, nm^2/s."""
    n_si = n_p * 1e27
    return species.gamma**2 * MU0 * np.cbrt(n_si) * HBAR / (24 * np.pi) * 1e18


def total_dephasing(scheme, h, params: ContinuumParams, D_total):
    s = Scheme.parse(scheme)
    _, g_diff = motion_model(h, params.d, D_total)
    g_t = target_dephasing(np.maximum(h, params.h_min), params.alpha_for(s), params.sigma_surf, params.a)
    return params.gamma_nv_for(s) + g_t + g_diff


def cooling_field(scheme, x, y, h, params: ContinuumParams, D_total, regime="dephased",
                  lambda_ref=None):
    """Local cooling rate u (1/s).

    Dephased regime: u = Lambda^2 / Gamma2 with NV, surface and motional
    contributions. Ideal regime: u = Lambda^2 / (pi Lambda_ref).
    """
    s = Scheme.parse(scheme)
    tau_d, _ = motion_model(h, params.d, D_total)
    form = "rotated" if (s is Scheme.CRa and params.cra_form == "rotated") else "closed"
    lam2 = lambda_sq_field(s, x, y, h, params.d, params.a, tau_d, params.tau_p, form)
    if regime == "dephased":
        g2 = total_dephasing(s, h, params, D_total)
        if np.any(g2 <= 0):
            raise DomainError("Gamma2 must be positive in the dephased regime")
        return lam2 / g2
    if regime == "ideal":
        if lambda_ref is None or lambda_ref <= 0:
            raise DomainError("ideal regime needs a positive reference coupling")
        return lam2 / (np.pi * lambda_ref)
    raise DomainError(f"unknown regime {regime!r}")


# ----------------------------------------------------------------- grid

@dataclass(frozen=True)
class GridSpec:
    L: float
    spacing: float
    grading: float = 1.15
    symmetry: bool = True
    uniform_extent: float | None = None  # half-width of the uniform x,y core

    def __post_init__(self):
        if self.L <= 0 or self.spacing <= 0:
            raise DomainError("L and spacing must be positive")
        if self.grading < 1:
            raise DomainError("grading ratio must be >= 1")

    @classmethod
    def default(cls, D_total: float, params: ContinuumParams, refine: float = 1.0, symmetry=True):
        if D_total < 1e4:
            L = 1000.0
        else:
            L = 10 * np.sqrt(6 * D_total * params.T1T)
        return cls(L, params.d / 3 / refine, 1 + 0.15 / refine, symmetry, 4 * params.d)


def _graded(start, stop, h0, ratio, uniform_to):
    e = [start]
    h = h0
    while e[-1] < stop - 1e-12:
        nxt = e[-1] + h
        if nxt > stop or stop - nxt < 0.5 * h:
            nxt = stop
        e.append(nxt)
        if e[-1] >= uniform_to:
            h *= ratio
    return np.array(e)


def build_axes(grid: GridSpec, params: ContinuumParams):
    """Cell edges along x, y (half or full) and z (height above the surface)."""
    core = grid.uniform_extent if grid.uniform_extent is not None else 4 * params.d
    half = _graded(0.0, grid.L / 2, grid.spacing, grid.grading, core)
    xy = half if grid.symmetry else np.concatenate([-half[:0:-1], half])
    z = _graded(params.h_min, grid.L, grid.spacing / 2, grid.grading, params.h_min)
    return xy, xy.copy(), z


@dataclass
class PolarizationField:
    xedges: np.ndarray
    yedges: np.ndarray
    zedges: np.ndarray
    P: np.ndarray
    u: np.ndarray
    P_inf: float
    residual: float
    symmetry: bool
    meta: dict = field(default_factory=dict)

    @property
    def centres(self):
        return [(e[1:] + e[:-1]) / 2 for e in (self.xedges, self.yedges, self.zedges)]

    @property
    def volumes(self):
        wx, wy, wz = (np.diff(e) for e in (self.xedges, self.yedges, self.zedges))
        return wx[:, None, None] * wy[None, :, None] * wz[None, None, :]


_GZ, _GW = np.polynomial.legendre.leggauss(4)


def _cell_average_u(scheme, cx, cy, zedges, params, D_total, regime, lambda_ref):
    """Cooling rate averaged over each cell in z (4-point Gauss) at the x,y centres."""
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    lo, hi = zedges[:-1], zedges[1:]
    u = np.zeros((len(cx), len(cy), len(lo)))
    for g, w in zip(_GZ, _GW):
        hz = 0.5 * (hi - lo) * g + 0.5 * (hi + lo)
        u += 0.5 * w * cooling_field(scheme, X[..., None], Y[..., None], hz[None, None, :], params,
                                     D_total, regime, lambda_ref)
    return u


def _lambda_ref(scheme, cx, cy, zedges, V, params, D_total, symmetry):
    X, Y = np.meshgrid(cx, cy, indexing="ij")
    lo, hi = zedges[:-1], zedges[1:]
    s = Scheme.parse(scheme)
    tau_d, _ = motion_model(0.5 * (lo + hi), params.d, D_total)
    form = "rotated" if (s is Scheme.CRa and params.cra_form == "rotated") else "closed"
    lam2 = lambda_sq_field(s, X[..., None], Y[..., None], 0.5 * (lo + hi)[None, None, :], params.d,
                           params.a, tau_d[None, None, :], params.tau_p, form)
    total = params.n_p * np.sum(lam2 * V) * (4 if symmetry else 1)
    return float(np.sqrt(total))


def _assemble(xe, ye, ze, D):
    """Finite-volume diffusion operator with no-flux faces (SPD, row sums zero)."""
    cx, cy, cz = [(e[1:] + e[:-1]) / 2 for e in (xe, ye, ze)]
    w = [np.diff(e) for e in (xe, ye, ze)]
    shape = (len(cx), len(cy), len(cz))
    V = w[0][:, None, None] * w[1][None, :, None] * w[2][None, None, :]
    idx = np.arange(V.size).reshape(shape)
    rows, cols, vals = [], [], []
    for ax, c in enumerate((cx, cy, cz)):
        dist = np.diff(c)
        area = V / w[ax].reshape([-1 if i == ax else 1 for i in range(3)])
        lo = [slice(None)] * 3
        hi = [slice(None)] * 3
        lo[ax] = slice(0, -1)
        hi[ax] = slice(1, None)
        T = (D * area[tuple(lo)] / dist.reshape([-1 if i == ax else 1 for i in range(3)])).ravel()
        i0 = idx[tuple(lo)].ravel()
        i1 = idx[tuple(hi)].ravel()
        rows += [i0, i1, i0, i1]
        cols += [i1, i0, i0, i1]
        vals += [-T, -T, T, T]
    n = V.size
    K = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()
    return K, V


def _solve_spd(M, b, tol):
    import pyamg

    # classical coarsening copes with the strongly graded cells far better
    # than smoothed aggregation here (15 vs ~400 CG iterations at high D).
    # Standard interpolation divides by zero on the nearly pure-Neumann
    # operator at very large D, direct interpolation does not.
    ml = pyamg.ruge_stuben_solver(M, interpolation="direct")
    count = [0]

    def tick(_x):
        count[0] += 1

    x, info = spla.cg(M, b, rtol=tol, atol=0.0, maxiter=500, M=ml.aspreconditioner(cycle="V"), callback=tick)
    rel = float(np.linalg.norm(b - M @ x) / max(np.linalg.norm(b), 1e-300))
    if info != 0 and rel > 1e-8:
        # fall back to a direct factorisation rather than return a stalled iterate
        x = spla.spsolve(M.tocsc(), b)
        rel = float(np.linalg.norm(b - M @ x) / max(np.linalg.norm(b), 1e-300))
    return x, rel, count[0]


def solve_steady_state(scheme, params: ContinuumParams, D_total: float, grid: GridSpec | None = None,
                       regime: str = "dephased", tol: float = 1e-10, lambda_ref=None) -> PolarizationField:
    """Steady state of dP/dt = -u (P + 1/2) - Gamma1 P + D lap P with no-flux walls.

    The elliptic problem (K + V(u + Gamma1)) P = -V u / 2 is symmetric
    positive definite and solved with algebraic multigrid preconditioned CG.
    P_inf is |sum n_p P V| over the full domain, in spins.
    """
    s = Scheme.parse(scheme)
    if D_total <= 0:
        raise DomainError("diffusion coefficient must be positive")
    grid = grid or GridSpec.default(D_total, params)
    if grid.spacing > params.d / 3 + 1e-12:
        raise DomainError(
            f"grid spacing {grid.spacing:g} nm is coarser than d/3 = {params.d / 3:g} nm; "
            "refine the grid to resolve the NV depth")
    t0 = time.perf_counter()
    xe, ye, ze = build_axes(grid, params)
    K, V = _assemble(xe, ye, ze, D_total)
    cx, cy = (xe[1:] + xe[:-1]) / 2, (ye[1:] + ye[:-1]) / 2
    if regime == "ideal" and lambda_ref is None:
        lambda_ref = _lambda_ref(s, cx, cy, ze, V, params, D_total, grid.symmetry)
    u = _cell_average_u(s, cx, cy, ze, params, D_total, regime, lambda_ref)
    M = (K + sp.diags((V * (u + params.gamma1)).ravel())).tocsr()
    b = -0.5 * (V * u).ravel()
    if not np.any(b):
        P = np.zeros_like(b)
        rel, iters = 0.0, 0
    else:
        P, rel, iters = _solve_spd(M, b, tol)
        if not np.isfinite(rel) or rel > max(100 * tol, 1e-8):
            raise NonConvergence(f"linear solve stalled: relative residual {rel:.3e} after {iters} iterations")
    P = P.reshape(V.shape)
    mult = 4 if grid.symmetry else 1
    P_inf = abs(float(params.n_p * np.sum(P * V) * mult))
    meta = {"n_cells": int(V.size), "iterations": iters, "seconds": time.perf_counter() - t0,
            "L": grid.L, "spacing": grid.spacing, "grading": grid.grading, "h_min": params.h_min,
            "lambda_ref": lambda_ref}
    return PolarizationField(xe, ye, ze, P, u, P_inf, rel, grid.symmetry, meta)


def pointwise_yield(scheme, params: ContinuumParams, D_total, grid: GridSpec | None = None,
                    regime="dephased") -> float:
    """No-transport limit: P = -(1/2) u / (Gamma1 + u) cell by cell, integrated."""
    grid = grid or GridSpec.default(D_total, params)
    xe, ye, ze = build_axes(grid, params)
    V = np.diff(xe)[:, None, None] * np.diff(ye)[None, :, None] * np.diff(ze)[None, None, :]
    cx, cy = (xe[1:] + xe[:-1]) / 2, (ye[1:] + ye[:-1]) / 2
    lref = None
    if regime == "ideal":
        lref = _lambda_ref(scheme, cx, cy, ze, V, params, D_total, grid.symmetry)
    u = _cell_average_u(scheme, cx, cy, ze, params, D_total, regime, lref)
    return float(params.n_p * np.sum(0.5 * u / (params.gamma1 + u) * V) * (4 if grid.symmetry else 1))


def transient(scheme, params: ContinuumParams, D_total, t_end, n_steps=50, grid=None,
              regime="dephased"):
    """Implicit-Euler integration from P = 0, for checking the steady solve."""
    import pyamg

    s = Scheme.parse(scheme)
    grid = grid or GridSpec.default(D_total, params)
    xe, ye, ze = build_axes(grid, params)
    K, V = _assemble(xe, ye, ze, D_total)
    cx, cy = (xe[1:] + xe[:-1]) / 2, (ye[1:] + ye[:-1]) / 2
    lref = _lambda_ref(s, cx, cy, ze, V, params, D_total, grid.symmetry) if regime == "ideal" else None
    u = _cell_average_u(s, cx, cy, ze, params, D_total, regime, lref).ravel()
    v = V.ravel()
    dt = t_end / n_steps
    M = (K + sp.diags(v * (u + params.gamma1) + v / dt)).tocsr()
    pre = pyamg.ruge_stuben_solver(M, interpolation="direct").aspreconditioner(cycle="V")
    P = np.zeros_like(v)
    for _ in range(n_steps):
        P, _info = spla.cg(M, v * P / dt - 0.5 * v * u, x0=P, rtol=1e-12, atol=0.0, M=pre, maxiter=500)
    return abs(float(params.n_p * np.sum(P * v) * (4 if grid.symmetry else 1)))


@dataclass
class YieldCurve:
    scheme: Scheme
    regime: str
    D: np.ndarray
    P_inf: np.ndarray
    residuals: np.ndarray
    meta: list = field(default_factory=list)


def yield_vs_diffusion(scheme, params: ContinuumParams, D_grid, regime="dephased", refine=1.0,
                       workers: int = 1) -> YieldCurve:
    """Steady-state yield for each total diffusion coefficient in ``D_grid``."""
    D = np.asarray(D_grid, dtype=float)
    if np.any(D <= 0) or np.any(np.diff(D) <= 0):
        raise DomainError("D grid must be positive and strictly increasing")
    s = Scheme.parse(scheme)

    def one(Dk):
        return solve_steady_state(s, params, Dk, GridSpec.default(Dk, params, refine), regime)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as ex:
            fields = list(ex.map(one, D))
    else:
        fields = [one(Dk) for Dk in D]
    return YieldCurve(s, regime, D, np.array([f.P_inf for f in fields]),
                      np.array([f.residual for f in fields]), [f.meta for f in fields])


def loglog_slope(D, P) -> float:
    """Least-squares slope of log P against log D."""
    return float(np.polyfit(np.log(D), np.log(P), 1)[0])
