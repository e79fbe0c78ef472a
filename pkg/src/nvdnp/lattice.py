"""Diamond lattice around an NV centre and Monte-Carlo statistics of 13C baths."""
from __future__ import annotations

import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .hyperfine import A_EC, DomainError, Scheme, lambda_at

LATTICE_CONSTANT = 0.3567  # nm
C13_ABUNDANCE = 0.011
DEFAULT_CUTOFF = 4.2  # nm
CONTINUUM_RMIN = 0.15  # nm, inner exclusion for the continuum mode


def _rotation_111_to_z() -> np.ndarray:
    z = np.array([1.0, 1.0, 1.0]) / np.sqrt(3)
    x = np.array([1.0, -1.0, 0.0]) / np.sqrt(2)
    return np.vstack([x, np.cross(z, x), z])


@dataclass(frozen=True)
class LatticeSpec:
    cutoff_radius: float = DEFAULT_CUTOFF
    lattice_constant: float = LATTICE_CONSTANT
    abundance: float = C13_ABUNDANCE
    centre: str = "midpoint"  # or "nitrogen", "vacancy"

    def __post_init__(self):
        if self.cutoff_radius < 0 or self.lattice_constant <= 0:
            raise DomainError("cutoff and lattice constant must be positive")
        if not 0 <= self.abundance <= 1:
            raise DomainError("abundance must lie in [0, 1]")
        if self.centre not in ("midpoint", "nitrogen", "vacancy"):
            raise DomainError(f"unknown cutoff centre {self.centre!r}")

    @property
    def nitrogen_site(self) -> np.ndarray:
        return np.zeros(3)

    @property
    def vacancy_site(self) -> np.ndarray:
        # nearest neighbour along [111], bond length sqrt(3) a / 4
        return np.array([0.0, 0.0, np.sqrt(3) / 4 * self.lattice_constant])

    @property
    def centre_point(self) -> np.ndarray:
        return {
            "midpoint": 0.5 * self.vacancy_site,
            "nitrogen": self.nitrogen_site,
            "vacancy": self.vacancy_site,
        }[self.centre]

    @property
    def site_density(self) -> float:
        return 8 / self.lattice_constant**3


def generate_lattice(spec: LatticeSpec = LatticeSpec()) -> np.ndarray:
    """Carbon sites within the cutoff sphere, [111] along +z, N at the origin.

    The two NV sites are removed. Returned positions are relative to the
    nitrogen; subtract ``spec.vacancy_site`` for electron-frame vectors.
    """
    a = spec.lattice_constant
    if spec.cutoff_radius == 0:
        return np.zeros((0, 3))
    ncell = int(np.ceil(spec.cutoff_radius * np.sqrt(3) / a)) + 2
    r = np.arange(-ncell, ncell + 1)
    cells = np.array(list(itertools.product(r, r, r)), dtype=float)
    fcc = np.array([[0, 0, 0], [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0]])
    basis = np.vstack([fcc, fcc + 0.25])
    pts = ((cells[:, None, :] + basis[None]) * a).reshape(-1, 3) @ _rotation_111_to_z().T
    d = np.linalg.norm(pts - spec.centre_point, axis=1)
    keep = d <= spec.cutoff_radius
    keep &= np.linalg.norm(pts - spec.nitrogen_site, axis=1) > 1e-9
    keep &= np.linalg.norm(pts - spec.vacancy_site, axis=1) > 1e-9
    return pts[keep]


@dataclass
class CouplingSet:
    per_spin: np.ndarray

    @property
    def total(self) -> float:
        return float(np.sqrt(np.sum(self.per_spin**2)))


@dataclass
class BathRealization:
    positions: np.ndarray  # electron frame, nm
    lambdas: dict = field(default_factory=dict)

    def coupling(self, scheme) -> CouplingSet:
        scheme = Scheme.parse(scheme)
        if scheme not in self.lambdas:
            lam = lambda_at(scheme, self.positions, A_EC) if len(self.positions) else np.zeros(0)
            self.lambdas[scheme] = CouplingSet(lam)
        return self.lambdas[scheme]


def realization_rng(seed: int, index: int) -> np.random.Generator:
    """Independent stream for realization ``index``; identical across runs and worker counts."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _occupied(n_sites: int, abundance: float, rng) -> np.ndarray:
    if abundance <= 0 or n_sites == 0:
        return np.zeros(0, dtype=np.intp)
    if abundance >= 1:
        return np.arange(n_sites)
    k = rng.binomial(n_sites, abundance)
    return np.sort(rng.choice(n_sites, k, replace=False))


def sample_bath(sites, abundance: float, rng_seed: int, index: int = 0,
                origin=None) -> BathRealization:
    """Occupy each site independently with probability ``abundance``.

    ``origin`` is the electron position (defaults to the vacancy of the
    default lattice).
    """
    if not 0 <= abundance <= 1:
        raise DomainError("abundance must lie in [0, 1]")
    sites = np.asarray(sites, dtype=float)
    origin = LatticeSpec().vacancy_site if origin is None else np.asarray(origin)
    idx = _occupied(len(sites), abundance, realization_rng(rng_seed, index))
    return BathRealization(sites[idx] - origin)


def total_coupling(bath: BathRealization, scheme) -> float:
    return bath.coupling(scheme).total


# ------------------------------------------------------------------ ensembles

@dataclass
class EnsembleTotals:
    """Total couplings (rad/s) per realization, one column per scheme."""

    schemes: tuple
    totals: np.ndarray
    seed: int
    mode: str
    meta: dict = field(default_factory=dict)

    def column(self, scheme) -> np.ndarray:
        return self.totals[:, self.schemes.index(Scheme.parse(scheme))]


def _lattice_chunk(args):
    sq, abundance, seed, lo, hi = args
    out = np.empty((hi - lo, sq.shape[0]))
    n = sq.shape[1]
    for i in range(lo, hi):
        idx = _occupied(n, abundance, realization_rng(seed, i))
        out[i - lo] = np.sqrt(sq[:, idx].sum(axis=1))
    return out


def _continuum_chunk(args):
    schemes, density, rmin, rmax, seed, lo, hi = args
    out = np.empty((hi - lo, len(schemes)))
    vol = 4 / 3 * np.pi * (rmax**3 - rmin**3)
    for i in range(lo, hi):
        rng = realization_rng(seed, i)
        k = rng.poisson(density * vol)
        r = np.cbrt(rng.uniform(rmin**3, rmax**3, k))
        u = rng.normal(size=(k, 3))
        pos = r[:, None] * u / np.linalg.norm(u, axis=1)[:, None]
        for j, s in enumerate(schemes):
            out[i - lo, j] = np.sqrt(np.sum(lambda_at(s, pos, A_EC) ** 2)) if k else 0.0
    return out


def _run_chunks(fn, payload, n, threads, chunk=5000):
    bounds = [(lo, min(n, lo + chunk)) for lo in range(0, n, chunk)]
    jobs = [payload + b for b in bounds]
    if threads and threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(threads) as ex:
            parts = list(ex.map(fn, jobs))
    else:
        parts = [fn(j) for j in jobs]
    return np.vstack(parts) if parts else np.zeros((0, 0))


def ensemble_totals(schemes=tuple(Scheme), n_realizations: int = 10_000, seed: int = 0,
                    mode: str = "lattice", spec: LatticeSpec = LatticeSpec(),
                    threads: int = 1, rmin: float = CONTINUUM_RMIN) -> EnsembleTotals:
    """Total coupling of every scheme for each random bath.

    All schemes are evaluated on the same realizations so joint statistics
    are meaningful. ``mode='continuum'`` drops the lattice and places a
    Poisson number of spins uniformly in the shell [rmin, cutoff] at the same
    mean 13C density.
    """
    if n_realizations < 1:
        raise DomainError("need at least one realization")
    schemes = tuple(Scheme.parse(s) for s in schemes)
    meta = {"cutoff_nm": spec.cutoff_radius, "lattice_constant_nm": spec.lattice_constant,
            "abundance": spec.abundance, "centre": spec.centre}
    if mode == "lattice":
        sites = generate_lattice(spec) - spec.vacancy_site
        sq = np.vstack([lambda_at(s, sites, A_EC) ** 2 for s in schemes]) if len(sites) else np.zeros((len(schemes), 0))
        totals = _run_chunks(_lattice_chunk, (sq, spec.abundance, seed), n_realizations, threads)
        meta["n_sites"] = int(sites.shape[0])
    elif mode == "continuum":
        density = spec.abundance * spec.site_density
        totals = _run_chunks(_continuum_chunk, (schemes, density, rmin, spec.cutoff_radius, seed),
                             n_realizations, threads)
        meta["rmin_nm"] = rmin
    else:
        raise DomainError(f"unknown mode {mode!r}")
    return EnsembleTotals(schemes, totals, seed, mode, meta)


# ------------------------------------------------------------------ histograms

def _edges(hi_hz: float, width_hz: float) -> np.ndarray:
    nb = max(1, int(np.ceil(hi_hz / width_hz)))
    return np.arange(nb + 1) * width_hz


@dataclass
class Histogram1D:
    edges: np.ndarray  # Hz
    counts: np.ndarray
    overflow: int = 0  # samples beyond the last edge

    @property
    def density(self) -> np.ndarray:
        # normalised by every sample, so the area equals the in-range fraction
        n = self.counts.sum() + self.overflow
        return self.counts / (n * np.diff(self.edges)) if n else np.zeros_like(self.edges[:-1])

    def merge(self, other: "Histogram1D") -> "Histogram1D":
        if not np.array_equal(self.edges, other.edges):
            raise DomainError("cannot merge histograms with different edges")
        return Histogram1D(self.edges, self.counts + other.counts, self.overflow + other.overflow)


@dataclass
class Histogram2D:
    xedges: np.ndarray
    yedges: np.ndarray
    counts: np.ndarray
    overflow: int = 0

    @property
    def density(self) -> np.ndarray:
        n = self.counts.sum() + self.overflow
        area = np.outer(np.diff(self.xedges), np.diff(self.yedges))
        return self.counts / (n * area) if n else np.zeros_like(area)

    def merge(self, other: "Histogram2D") -> "Histogram2D":
        if not (np.array_equal(self.xedges, other.xedges) and np.array_equal(self.yedges, other.yedges)):
            raise DomainError("cannot merge histograms with different edges")
        return Histogram2D(self.xedges, self.yedges, self.counts + other.counts, self.overflow + other.overflow)


def _upper(f, width, hi_hz, quantile):
    if hi_hz is not None:
        return hi_hz
    if not f.size:
        return width
    return (np.quantile(f, quantile) if quantile < 1 else f.max()) + width


def histogram1d(rates, bin_width_hz: float = 300.0, hi_hz: float | None = None,
                quantile: float = 1.0) -> Histogram1D:
    """Fixed-width histogram of rates (rad/s) on a Hz axis starting at 0.

    The upper edge is ``hi_hz`` when given, otherwise the ``quantile`` of the
    data plus one bin. Samples beyond it are counted in ``overflow``.
    """
    f = np.asarray(rates) / (2 * np.pi)
    edges = _edges(_upper(f, bin_width_hz, hi_hz, quantile), bin_width_hz)
    counts, _ = np.histogram(f, edges)
    return Histogram1D(edges, counts.astype(np.int64), int(f.size - counts.sum()))


def coupling_distribution(scheme, n_realizations: int = 10_000, mode: str = "lattice",
                          bin_width_hz: float = 300.0, seed: int = 0,
                          spec: LatticeSpec = LatticeSpec(), threads: int = 1) -> Histogram1D:
    ens = ensemble_totals((scheme,), n_realizations, seed, mode, spec, threads)
    return histogram1d(ens.totals[:, 0], bin_width_hz)


@dataclass
class JointStats:
    hist: Histogram2D
    prob_y_gt_x: float
    mean_ratio: float


def joint_from_totals(x, y, bin_width_hz: float = 300.0, hi_hz: float | None = None,
                      quantile: float = 1.0) -> JointStats:
    """Joint histogram of paired totals plus Pr(y > x) and <y>/<x> over all samples."""
    x, y = np.asarray(x), np.asarray(y)
    fx, fy = x / (2 * np.pi), y / (2 * np.pi)
    ex = _edges(_upper(fx, bin_width_hz, hi_hz, quantile), bin_width_hz)
    ey = _edges(_upper(fy, bin_width_hz, hi_hz, quantile), bin_width_hz)
    counts, _, _ = np.histogram2d(fx, fy, [ex, ey])
    counts = counts.astype(np.int64)
    mx = np.mean(x)
    return JointStats(Histogram2D(ex, ey, counts, int(fx.size - counts.sum())), float(np.mean(y > x)),
                      float(np.mean(y) / mx) if mx > 0 else float("nan"))


def joint_distribution(scheme_x, scheme_y, n_realizations: int = 10_000, seed: int = 0,
                       mode: str = "lattice", bin_width_hz: float = 300.0,
                       spec: LatticeSpec = LatticeSpec(), threads: int = 1) -> JointStats:
    sx, sy = Scheme.parse(scheme_x), Scheme.parse(scheme_y)
    if sx is sy:
        raise DomainError("joint distribution needs two distinct schemes")
    ens = ensemble_totals((sx, sy), n_realizations, seed, mode, spec, threads)
    return joint_from_totals(ens.totals[:, 0], ens.totals[:, 1], bin_width_hz)


# ------------------------------------------------------------------ nearest neighbour

def nn_analytic(n: float, a: float = A_EC):
    """Closed-form nearest-neighbour distance and coupling densities at density ``n``.

    P_R(R) = 4 pi n R^2 exp(-4 pi n R^3 / 3) and
    P_L(L) = (4 pi a n / 3 L^2) exp(-4 pi a n / 3 L).
    """
    if n <= 0:
        raise DomainError("density must be positive")
    c = 4 * np.pi * n / 3

    def p_r(R):
        R = np.asarray(R, dtype=float)
        return 3 * c * R**2 * np.exp(-c * R**3)

    def p_lambda(L):
        L = np.asarray(L, dtype=float)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = np.where(L > 0, a * c / L**2 * np.exp(-a * c / L), 0.0)
        return out

    return p_r, p_lambda
