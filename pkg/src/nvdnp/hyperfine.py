"""Dipolar hyperfine couplings between an NV electron spin and nuclear spins.

Rates are angular frequencies (rad/s) everywhere inside the package. Lengths
are in nanometres. Conversion to Hz happens only at serialisation time.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

# CODATA 2018
MU0 = 1.25663706212e-6  # T m / A
HBAR = 1.054571817e-34  # J s
MU_B = 9.2740100783e-24  # J / T
G_E = 2.0

GAMMA_E = G_E * MU_B / HBAR  # rad s^-1 T^-1
GAMMA_H = 2.6752218744e8
GAMMA_C13 = 6.728284e7

D_ZFS = 2 * np.pi * 2.87e9  # NV ground-state zero-field splitting, rad/s


class DomainError(ValueError):
    """Raised when an argument lies outside the physical domain of a law."""


@dataclass(frozen=True)
class SpinSpecies:
    name: str
    gamma: float
    spin: float = 0.5

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma == 0:
            raise DomainError(f"gyromagnetic ratio of {self.name} must be finite and nonzero")
        if self.spin not in (0.5, 1.0):
            raise DomainError(f"spin of {self.name} must be 1/2 or 1, got {self.spin}")


ELECTRON = SpinSpecies("e", GAMMA_E, 1.0)
PROTON = SpinSpecies("1H", GAMMA_H)
CARBON13 = SpinSpecies("13C", GAMMA_C13)

SPECIES = {s.name: s for s in (ELECTRON, PROTON, CARBON13)}


def coupling_constant(s1: SpinSpecies = ELECTRON, s2: SpinSpecies = PROTON) -> float:
    """Dipolar prefactor a = mu0 hbar g1 g2 / 4pi in rad s^-1 nm^3."""
    return MU0 * HBAR / (4 * np.pi) * s1.gamma * s2.gamma * 1e27


A_EH = coupling_constant(ELECTRON, PROTON)
A_EC = coupling_constant(ELECTRON, CARBON13)


class Scheme(str, enum.Enum):
    CRa = "CRa"
    CRb = "CRb"
    HH = "HH"
    PolCPMG = "PolCPMG"
    PulsePol = "PulsePol"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value))
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise DomainError(f"unknown scheme {value!r}; valid variants are {valid}") from None

    @property
    def pulsed(self) -> bool:
        return self in (Scheme.PolCPMG, Scheme.PulsePol)


# Effective-coupling factors of the pulsed sequences relative to HH.
POLCPMG_FACTOR = 2 / np.pi
PULSEPOL_FACTOR = 2 * (2 + np.sqrt(2)) / (3 * np.pi)

_PULSED = {Scheme.PolCPMG: POLCPMG_FACTOR, Scheme.PulsePol: PULSEPOL_FACTOR}


def dipole_tensor(R, a: float = A_EH) -> np.ndarray:
    """Hyperfine tensor A_mn = (a/R^3)(delta_mn - 3 R_m R_n / R^2).

    ``R`` may be a single vector of shape (3,) or a stack (..., 3); the
    result then has shape (..., 3, 3).
    """
    R = np.asarray(R, dtype=float)
    r2 = np.einsum("...i,...i->...", R, R)
    if np.any(r2 <= 0) or not np.all(np.isfinite(R)):
        raise DomainError("separation vector must be finite and nonzero")
    r = np.sqrt(r2)
    outer = R[..., :, None] * R[..., None, :]
    return (a / r**3)[..., None, None] * (np.eye(3) - 3 * outer / r2[..., None, None])


def lambda_scheme(scheme, R, theta, a: float = A_EH):
    """Flip-flop rate of one nucleus at distance R and polar angle theta.

    Angular form of the coupling laws with the NV axis along +z. Accepts
    numpy arrays for R and theta.
    """
    scheme = Scheme.parse(scheme)
    R = np.asarray(R, dtype=float)
    if np.any(R <= 0):
        raise DomainError("R must be positive")
    c = np.cos(theta)
    s = np.sin(theta)
    r3 = R**3
    if scheme is Scheme.CRa:
        return 3 * a * s * s / (np.sqrt(2) * r3)
    if scheme is Scheme.CRb:
        return a * np.abs(3 * c * c - 1) / (np.sqrt(2) * r3)
    hh = 1.5 * a * np.abs(s * c) / r3
    return _PULSED.get(scheme, 1.0) * hh


def lambda_from_tensor(scheme, A) -> np.ndarray:
    """Flip-flop rate from explicit tensor components (NV frame, axis z).

    The cross-relaxation rates use the transverse block of A, the HH family
    uses the (zx, zy) column. For a pure dipolar tensor this agrees with
    :func:`lambda_scheme` for any azimuth.
    """
    scheme = Scheme.parse(scheme)
    A = np.asarray(A, dtype=float)
    axx, ayy, axy = A[..., 0, 0], A[..., 1, 1], A[..., 0, 1]
    if scheme is Scheme.CRa:
        return np.sqrt((axx - ayy) ** 2 + (2 * axy) ** 2) / np.sqrt(2)
    if scheme is Scheme.CRb:
        return np.abs(axx + ayy) / np.sqrt(2)
    hh = 0.5 * np.hypot(A[..., 2, 0], A[..., 2, 1])
    return _PULSED.get(scheme, 1.0) * hh


def lambda_at(scheme, R, a: float = A_EH):
    """Coupling rate for Cartesian positions R (..., 3) relative to the NV."""
    R = np.asarray(R, dtype=float)
    r = np.linalg.norm(R, axis=-1)
    if np.any(r <= 0):
        raise DomainError("nucleus cannot sit on the NV")
    return lambda_scheme(scheme, r, np.arccos(np.clip(R[..., 2] / r, -1, 1)), a)


def _check_p(P0):
    if np.any(np.abs(np.asarray(P0)) > 0.5 + 1e-12):
        raise DomainError("polarisation must lie in [-1/2, 1/2]")


def single_spin_polarization(t, P0, Lambda):
    """Coherent transfer P(t) = P0 - (P0 + 1/2) sin^2(Lambda t / 2)."""
    _check_p(P0)
    if np.any(np.asarray(t) < 0):
        raise DomainError("t must be nonnegative")
    return P0 - (P0 + 0.5) * np.sin(0.5 * np.asarray(Lambda) * t) ** 2


def dephased_polarization(t, P0, Lambda, Gamma2, full_depth: bool = False):
    """Strongly dephased transfer, P(t) = P0 + c (P0 + 1/2)(exp(-L^2 t / G2) - 1).

    With the default ``c = 1/2`` a fresh spin saturates at -1/4.
    ``full_depth`` switches to ``c = 1`` so the asymptote becomes -1/2.
    """
    _check_p(P0)
    if np.any(np.asarray(Gamma2) <= 0):
        raise DomainError("Gamma2 must be positive")
    c = 1.0 if full_depth else 0.5
    return P0 + c * (P0 + 0.5) * np.expm1(-np.asarray(Lambda) ** 2 * t / Gamma2)


def solid_angle_mean(scheme, n: int = 200, power: int = 1) -> float:
    """<Lambda^power> over the unit sphere at R = 1 nm, a = 1.

    Gauss-Legendre in theta on pieces split at the |..| kinks of the laws
    (pi/2 and the magic angles); in theta the integrand is smooth on each piece.
    """
    scheme = Scheme.parse(scheme)
    m = np.arccos(1 / np.sqrt(3))
    kinks = [0.0, m, np.pi / 2, np.pi - m, np.pi]
    x, w = np.polynomial.legendre.leggauss(n)
    total = 0.0
    for lo, hi in zip(kinks[:-1], kinks[1:]):
        th = 0.5 * (hi - lo) * x + 0.5 * (hi + lo)
        f = lambda_scheme(scheme, 1.0, th, 1.0) ** power * np.sin(th)
        total += 0.5 * (hi - lo) * np.dot(w, f)
    return total / 2


def cr_resonance_field(species: SpinSpecies = PROTON, branch: str = "a") -> float:
    """Static field (T) where the |0> <-> |-1> splitting equals the nuclear Larmor frequency.

    Branch ``a`` lies above the ground-state anti-crossing, ``b`` below it.
    """
    if branch == "a":
        return D_ZFS / (GAMMA_E - species.gamma)
    if branch == "b":
        return D_ZFS / (GAMMA_E + species.gamma)
    raise DomainError("branch must be 'a' or 'b'")


def larmor(species: SpinSpecies, B: float) -> float:
    return species.gamma * B
