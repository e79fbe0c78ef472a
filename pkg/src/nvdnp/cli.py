"""Batch front-end: ``nvdnp run|validate|constants``.

An experiment file is TOML with a ``kind`` plus a ``[parameters]`` table::

    kind = "yield"
    seed = 0
    [parameters]
    schemes = ["CRa", "HH", "PulsePol"]
    n_D = 20
    [parameters.continuum]
    d = 5.0

Every run writes CSV tables and one ``manifest.json`` into the output
directory. Exit status is 0 on success, 2 for configuration problems and 3
when a numerical routine fails.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import platform
import sys
import time
import warnings
from dataclasses import dataclass, field
from importlib import metadata
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__
from . import continuum as cont
from . import dynamics as dyn
from . import lattice as lat
from . import oracle as orc
from .hyperfine import (
    A_EC,
    A_EH,
    D_ZFS,
    GAMMA_C13,
    GAMMA_E,
    GAMMA_H,
    SPECIES,
    DomainError,
    Scheme,
    cr_resonance_field,
    lambda_at,
    lambda_scheme,
    solid_angle_mean,
)
from .tables import default_output_dir, emit_plot_data, write_csv

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------- schema
# Each entry maps a key to (default, checker). A checker returns the coerced
# value or raises ConfigError naming the constraint.

def _num(lo=None, hi=None, strict_lo=False, integer=False):
    def check(key, v):
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise ConfigError(f"{key}: expected a number, got {v!r}")
        if integer and int(v) != v:
            raise ConfigError(f"{key}: expected an integer, got {v!r}")
        v = int(v) if integer else float(v)
        if lo is not None and (v <= lo if strict_lo else v < lo):
            raise ConfigError(f"{key}: must be {'>' if strict_lo else '>='} {lo}, got {v}")
        if hi is not None and v > hi:
            raise ConfigError(f"{key}: must be <= {hi}, got {v}")
        return v
    return check


def _opt(inner):
    def check(key, v):
        return None if v is None else inner(key, v)
    return check


def _choice(*options):
    def check(key, v):
        if v not in options:
            raise ConfigError(f"{key}: must be one of {', '.join(map(str, options))}; got {v!r}")
        return v
    return check


def _flag(key, v):
    if not isinstance(v, bool):
        raise ConfigError(f"{key}: expected true or false, got {v!r}")
    return v


def _scheme(key, v):
    try:
        return Scheme.parse(v).value
    except DomainError as e:
        raise ConfigError(f"{key}: {e}") from None


def _schemes(key, v):
    if not isinstance(v, list) or not v:
        raise ConfigError(f"{key}: expected a non-empty list of schemes")
    out = [_scheme(key, s) for s in v]
    if len(set(out)) != len(out):
        raise ConfigError(f"{key}: schemes must not repeat")
    return out


def _species(key, v):
    if v not in ("1H", "13C"):
        raise ConfigError(f"{key}: nuclear species must be '1H' or '13C', got {v!r}")
    return v


def _positions(key, v):
    try:
        arr = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError(f"{key}: expected a list of [x, y, z] triples in nm") from None
    if arr.ndim != 2 or arr.shape[1] != 3 or not 1 <= len(arr) <= orc.MAX_NUCLEI:
        raise ConfigError(f"{key}: need 1 to {orc.MAX_NUCLEI} positions of the form [x, y, z]")
    if np.any(np.linalg.norm(arr, axis=1) <= 0):
        raise ConfigError(f"{key}: a nucleus cannot sit on the NV")
    return arr.tolist()


def _pairs(key, v):
    if not isinstance(v, list) or not all(isinstance(p, list) and len(p) == 2 for p in v):
        raise ConfigError(f"{key}: expected a list of [scheme, scheme] pairs")
    out = [[_scheme(key, a), _scheme(key, b)] for a, b in v]
    if any(a == b for a, b in out):
        raise ConfigError(f"{key}: a pair needs two distinct schemes")
    return out


def _float_list(lo=None, strict_lo=True):
    each = _num(lo, strict_lo=strict_lo)

    def check(key, v):
        if not isinstance(v, list) or not v:
            raise ConfigError(f"{key}: expected a non-empty list of numbers")
        return [each(key, x) for x in v]
    return check


def _gamma_nv(key, v):
    if not isinstance(v, dict):
        raise ConfigError(f"{key}: expected a table of scheme = rate")
    return {_scheme(key, k): _num(0, strict_lo=True)(f"{key}.{k}", g) for k, g in v.items()}


_CONTINUUM = {
    "d": (5.0, _num(0, strict_lo=True)),
    "alpha": (None, _opt(_num(0, 90))),
    "n_p": (56.0, _num(0)),
    "sigma_surf": (0.1, _num(0)),
    "T1T": (1.0, _num(0, strict_lo=True)),
    "gamma_nv": ({}, _gamma_nv),
    "D_sp": (0.0, _num(0)),
    "omega_T": (None, _opt(_num(0, strict_lo=True))),
    "h_min": (0.2, _num(0, strict_lo=True)),
    "cra_form": ("closed", _choice("closed", "rotated")),
}

_ALL = [s.value for s in Scheme]

SCHEMAS = {
    "couplings": {
        "schemes": (_ALL, _schemes),
        "R_nm": (1.0, _num(0, strict_lo=True)),
        "n_theta": (181, _num(2, integer=True)),
        "species": ("1H", _species),
    },
    "oracle": {
        "scheme": ("CRa", _scheme),
        "positions": ([[0.8, 0.0, 1.2]], _positions),
        "species": ("13C", _species),
        "field_T": (None, _opt(_num(0, strict_lo=True))),
        "pulse_train": (False, _flag),
        "tau_max_us": (None, _opt(_num(0, strict_lo=True))),
        "n_tau": (121, _num(2, integer=True)),
        "Np": (3, _num(0, integer=True)),
        "iNp": (3, _num(0, integer=True)),
        "cycles": (1, _num(1, integer=True)),
        "reset_fidelity": (1.0, _num(0, 1)),
    },
    "distribution": {
        "n_realizations": (10_000, _num(1, integer=True)),
        "mode": ("lattice", _choice("lattice", "continuum")),
        "schemes": (["CRa", "CRb", "HH"], _schemes),
        "pairs": ([["CRa", "HH"], ["CRb", "HH"], ["CRa", "CRb"]], _pairs),
        "bin_width_hz": (300.0, _num(0, strict_lo=True)),
        "joint_bin_width_hz": (10_000.0, _num(0, strict_lo=True)),
        "max_hz": (None, _opt(_num(0, strict_lo=True))),
        "quantile": (0.99, _num(0, 1, strict_lo=True)),
        "cutoff_nm": (lat.DEFAULT_CUTOFF, _num(0, strict_lo=True)),
        "abundance": (lat.C13_ABUNDANCE, _num(0, 1)),
        "lattice_constant_nm": (lat.LATTICE_CONSTANT, _num(0, strict_lo=True)),
        "centre": ("midpoint", _choice("midpoint", "nitrogen", "vacancy")),
    },
    "dynamics": {
        "scheme": ("CRa", _scheme),
        "lambdas_hz": (None, _opt(_float_list(0))),
        "realization": (0, _num(0, integer=True)),
        "max_spins": (40, _num(1, integer=True)),
        "P0": (0.0, _num(-0.5, 0.5)),
        "gamma1": (0.0, _num(0)),
        "include_hf_diffusion": (False, _flag),
        "t_end_s": (None, _opt(_num(0, strict_lo=True))),
        "n_t": (201, _num(2, integer=True)),
    },
    "orientation": {
        "schemes": (["CRa", "CRb", "HH"], _schemes),
        "alpha_step_deg": (1.0, _num(0, 90, strict_lo=True)),
        "continuum": ({}, None),
    },
    "yield": {
        "schemes": (["CRa", "HH", "PulsePol"], _schemes),
        "D": (None, _opt(_float_list(0))),
        "D_min": (0.1, _num(0, strict_lo=True)),
        "D_max": (1e10, _num(0, strict_lo=True)),
        "n_D": (20, _num(1, integer=True)),
        "regime": ("dephased", _choice("dephased", "ideal", "both")),
        "refine": (1.0, _num(0, strict_lo=True)),
        "continuum": ({}, None),
    },
}

_TOP = {"kind", "seed", "output_dir", "parameters"}


def _resolve(block: dict, schema: dict, where: str) -> dict:
    unknown = sorted(set(block) - set(schema))
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}; allowed: {', '.join(schema)}")
    out = {}
    for key, (default, check) in schema.items():
        name = f"{where}.{key}"
        if key == "continuum":
            sub = block.get(key, {})
            if not isinstance(sub, dict):
                raise ConfigError(f"{name}: expected a table")
            out[key] = _resolve(sub, _CONTINUUM, name)
            continue
        v = block.get(key, default)
        out[key] = check(name, v) if check is not None else v
    return out


@dataclass
class ExperimentSpec:
    kind: str
    parameters: dict
    seed: int = 0
    output_dir: Path | None = None
    source: str = ""
    derived: dict = field(default_factory=dict)

    def continuum_params(self) -> cont.ContinuumParams:
        c = dict(self.parameters["continuum"])
        if c["omega_T"] is None:
            c.pop("omega_T")
        gam = {s.value: g for s, g in cont.DEFAULT_GAMMA_NV.items()}
        gam.update(c.pop("gamma_nv"))
        return cont.ContinuumParams(gamma_nv=gam, **c)

    def echo(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "parameters": self.parameters,
                "output_dir": str(self.output_dir) if self.output_dir else None,
                "source": self.source}


def parse_spec(data: dict, source: str = "<memory>") -> ExperimentSpec:
    unknown = sorted(set(data) - _TOP)
    if unknown:
        raise ConfigError(f"unknown top-level key(s) {', '.join(unknown)}; allowed: {', '.join(sorted(_TOP))}")
    kind = data.get("kind")
    if kind not in SCHEMAS:
        raise ConfigError(f"kind: must be one of {', '.join(SCHEMAS)}; got {kind!r}")
    seed = _num(0, integer=True)("seed", data.get("seed", 0))
    params = data.get("parameters", {})
    if not isinstance(params, dict):
        raise ConfigError("parameters: expected a table")
    resolved = _resolve(params, SCHEMAS[kind], "parameters")
    out = data.get("output_dir")
    spec = ExperimentSpec(kind, resolved, seed, Path(out) if out else None, source)
    if kind == "yield":
        if resolved["D"] is None and resolved["D_max"] <= resolved["D_min"]:
            raise ConfigError("parameters.D_max: must exceed D_min")
        if resolved["D"] is not None and np.any(np.diff(resolved["D"]) <= 0):
            raise ConfigError("parameters.D: values must be strictly increasing")
    if "continuum" in resolved:
        try:
            spec.continuum_params()
        except DomainError as e:
            raise ConfigError(f"parameters.continuum: {e}") from None
    return spec


def load_spec(path) -> ExperimentSpec:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"experiment file not found: {path}")
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: not valid TOML ({e})") from None
    return parse_spec(data, str(path))


# --------------------------------------------------------------------- runners

def _run_couplings(spec, out, threads):
    p = spec.parameters
    a = A_EH if p["species"] == "1H" else A_EC
    theta = np.linspace(0, np.pi, p["n_theta"])
    rows, series, means = [], {}, {}
    for s in p["schemes"]:
        lam = lambda_scheme(s, p["R_nm"], theta, a)
        rows += [(s, np.degrees(t), p["R_nm"], l, l / (2 * np.pi)) for t, l in zip(theta, lam)]
        series[s] = (np.degrees(theta), lam / (2 * np.pi))
        means[s] = solid_angle_mean(s) * a / p["R_nm"] ** 3
    files = [write_csv(out / "couplings.csv", ["scheme", "theta_deg", "R_nm", "lambda_rad_s", "lambda_hz"], rows),
             emit_plot_data(series, out / "plot_couplings.csv")]
    return files, {"solid_angle_mean_rad_s": means}


def _run_oracle(spec, out, threads):
    p = spec.parameters
    sp = SPECIES[p["species"]]
    pos = np.asarray(p["positions"])
    sys_ = orc.SpinSystem(pos, sp, p["field_T"])
    s = Scheme.parse(p["scheme"])
    lam = lambda_at(s, pos, sys_.a)
    analytic = float(np.sqrt(np.sum(lam**2)))
    if len(pos) == 1:
        measured = orc.oracle_rate(s, pos[0], sp, p["field_T"])
        method = "spectral"
    else:
        measured = orc.initial_decay_rate(s, pos, sp, p["field_T"])
        method = "envelope"
    rel = measured / analytic - 1
    files = [write_csv(out / "oracle.csv",
                       ["scheme", "n_nuclei", "method", "lambda_analytic", "lambda_oracle", "rel_err",
                        "secular_parameter"],
                       [(s.value, len(pos), method, analytic, measured, rel, orc.secular_parameter(sys_, s))])]
    summary = {"lambda_analytic": analytic, "lambda_oracle": measured, "rel_err": rel}
    if p["pulse_train"]:
        tmax = p["tau_max_us"] * 1e-6 if p["tau_max_us"] else 3 * np.pi / analytic
        taus = np.linspace(0, tmax, p["n_tau"])
        prog = orc.PulseProgram(s, Np=p["Np"], iNp=p["iNp"], reset_fidelity=p["reset_fidelity"],
                                cycles=p["cycles"])
        res = orc.simulate_pulse_train(sys_, prog, taus)
        rows = []
        for i, t in enumerate(taus):
            for b, kind in enumerate(res.block_kind):
                rows.append((t, b, kind, res.survival[i, b], *res.polarization[i, b]))
        head = ["tau_s", "block", "block_kind", "survival"] + [f"P_{j}" for j in range(len(pos))]
        files.append(write_csv(out / "pulse_train.csv", head, rows))
        series = {f"block{b}_{k}": (taus * 1e6, res.survival[:, b]) for b, k in enumerate(res.block_kind)}
        files.append(emit_plot_data(series, out / "plot_pulse_train.csv"))
        summary["tau_opt_s"] = float(np.pi / analytic)
    return files, summary


def _lattice_spec(p):
    return lat.LatticeSpec(p["cutoff_nm"], p["lattice_constant_nm"], p["abundance"], p["centre"])


def _run_distribution(spec, out, threads):
    p = spec.parameters
    schemes = list(dict.fromkeys(p["schemes"] + [s for pr in p["pairs"] for s in pr]))
    ens = lat.ensemble_totals(schemes, p["n_realizations"], spec.seed, p["mode"], _lattice_spec(p), threads)
    files = [write_csv(out / "totals.csv", ["realization"] + schemes,
                       [(i, *row) for i, row in enumerate(ens.totals)])]
    for s in p["schemes"]:
        h = lat.histogram1d(ens.column(s), p["bin_width_hz"], p["max_hz"], p["quantile"])
        files.append(emit_plot_data(h, out / f"hist_{s}.csv"))
    rows, probs = [], {}
    for a, b in p["pairs"]:
        js = lat.joint_from_totals(ens.column(b), ens.column(a), p["joint_bin_width_hz"], p["max_hz"],
                                   p["quantile"])
        rows.append((a, b, js.prob_y_gt_x, js.mean_ratio, p["n_realizations"]))
        probs[f"Pr({a}>{b})"] = js.prob_y_gt_x
        files.append(emit_plot_data(js.hist, out / f"joint_{b}_{a}.csv"))
    files.append(write_csv(out / "joint_summary.csv", ["scheme_a", "scheme_b", "prob_a_gt_b", "mean_ratio_a_b",
                                                       "n_realizations"], rows))
    return files, {"probabilities": probs, **ens.meta}


def _run_dynamics(spec, out, threads):
    p = spec.parameters
    if p["lambdas_hz"] is not None:
        lam = 2 * np.pi * np.asarray(p["lambdas_hz"])
        origin = "explicit"
    else:
        sites = lat.generate_lattice(lat.LatticeSpec())
        bath = lat.sample_bath(sites, lat.C13_ABUNDANCE, spec.seed, p["realization"])
        lam = np.sort(bath.coupling(p["scheme"]).per_spin)[::-1][: p["max_spins"]]
        origin = f"lattice realization {p['realization']} (strongest {len(lam)} spins)"
    if lam.size == 0 or not np.any(lam):
        raise DomainError("bath has no coupled spins")
    u = dyn.cooling_rates(lam)
    t_end = p["t_end_s"] or 5.0 / float(np.median(u))
    t = np.linspace(0, t_end, p["n_t"])
    cfg = dyn.DynamicsConfig(p["gamma1"], p["include_hf_diffusion"])
    P = dyn.integrate_bath(np.full(lam.size, p["P0"]), lam, cfg, t)
    closed = dyn.analytic_saturation(t[:, None], p["P0"], u[None, :], p["gamma1"])
    rows = [(ti, j, lam[j], P[i, j], closed[i, j]) for i, ti in enumerate(t) for j in range(lam.size)]
    L = float(np.sqrt(np.sum(lam**2)))
    tau = np.pi / L
    files = [
        write_csv(out / "dynamics.csv", ["t_s", "spin", "lambda_rad_s", "P", "P_closed_form"], rows),
        write_csv(out / "nv_signal.csv", ["t_s", "P_NV"], list(zip(t, dyn.nv_signal_decay(t, L)))),
        emit_plot_data({f"spin{j}": (t, P[:, j]) for j in range(lam.size)}, out / "plot_dynamics.csv"),
    ]
    return files, {"origin": origin, "lambda_total": L, "tau_opt_s": tau, "n_spins": int(lam.size),
                   "steady_state": dyn.steady_state(lam, cfg).tolist() if p["gamma1"] > 0 else None}


def _run_orientation(spec, out, threads):
    p = spec.parameters
    params = spec.continuum_params()
    alphas = np.arange(0.0, 90.0 + 1e-9, p["alpha_step_deg"])
    rows, series, best = [], {}, {}
    for s in p["schemes"]:
        e = np.array([cont.eta(s, al, params) for al in alphas])
        rows += [(s, al, v) for al, v in zip(alphas, e)]
        series[s] = (alphas, e)
        k = int(np.argmax(e))
        best[s] = {"alpha_deg": float(alphas[k]), "eta": float(e[k])}
    files = [write_csv(out / "orientation.csv", ["scheme", "alpha_deg", "eta"], rows),
             emit_plot_data(series, out / "plot_orientation.csv")]
    return files, {"optima": best}


def _run_yield(spec, out, threads):
    p = spec.parameters
    params = spec.continuum_params()
    D = np.asarray(p["D"]) if p["D"] is not None else np.logspace(np.log10(p["D_min"]), np.log10(p["D_max"]),
                                                                   p["n_D"])
    regimes = ["dephased", "ideal"] if p["regime"] == "both" else [p["regime"]]
    rows, files, slopes = [], [], {}
    for reg in regimes:
        for s in p["schemes"]:
            curve = cont.yield_vs_diffusion(s, params, D, reg, p["refine"], workers=threads)
            rows += [(s, reg, d, pi, r, m["iterations"], m["n_cells"])
                     for d, pi, r, m in zip(curve.D, curve.P_inf, curve.residuals, curve.meta)]
            files.append(emit_plot_data(curve, out / f"plot_yield_{s}_{reg}.csv"))
            if len(D) >= 4:
                slopes[f"{s}/{reg}"] = {"low_D": cont.loglog_slope(D[:3], curve.P_inf[:3]),
                                        "high_D": cont.loglog_slope(D[-3:], curve.P_inf[-3:]),
                                        "D_peak": float(D[np.argmax(curve.P_inf)])}
    files.insert(0, write_csv(out / "yield.csv", ["scheme", "regime", "D", "P_inf", "residual", "iterations",
                                                  "n_cells"], rows))
    return files, {"D_dp": cont.dipole_diffusion(params.n_p), "params": params.as_dict(), "slopes": slopes}


RUNNERS = {
    "couplings": _run_couplings,
    "oracle": _run_oracle,
    "distribution": _run_distribution,
    "dynamics": _run_dynamics,
    "orientation": _run_orientation,
    "yield": _run_yield,
}


# --------------------------------------------------------------------- manifest

def derived_constants() -> dict:
    return {
        "gamma_e_rad_s_T": GAMMA_E,
        "gamma_1H_rad_s_T": GAMMA_H,
        "gamma_13C_rad_s_T": GAMMA_C13,
        "D_zfs_rad_s": D_ZFS,
        "a_e_1H_rad_s_nm3": A_EH,
        "a_e_13C_rad_s_nm3": A_EC,
        "B_CRa_1H_T": cr_resonance_field(SPECIES["1H"], "a"),
        "B_CRb_1H_T": cr_resonance_field(SPECIES["1H"], "b"),
        "B_CRa_13C_T": cr_resonance_field(SPECIES["13C"], "a"),
        "omega_T_default_rad_s": cont.default_omega_T(),
        "D_dp_nm2_s": cont.dipole_diffusion(56.0),
        "lattice_constant_nm": lat.LATTICE_CONSTANT,
        "abundance_13C": lat.C13_ABUNDANCE,
    }


def _versions() -> dict:
    out = {"python": platform.python_version(), "nvdnp": __version__}
    for pkg in ("numpy", "scipy", "pyamg"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = None
    return out


def _jsonable(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Path):
        return str(o)
    raise TypeError(f"cannot serialise {type(o).__name__}")


def run(spec: ExperimentSpec, out_dir=None, threads: int = 1) -> dict:
    """Execute ``spec`` and write its tables plus manifest.json; returns the manifest."""
    out = Path(out_dir or spec.output_dir or default_output_dir())
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        files, summary = RUNNERS[spec.kind](spec, out, threads)
    elapsed = time.perf_counter() - t0
    manifest = {
        "spec": spec.echo(),
        "versions": _versions(),
        "timing": {"seconds": elapsed, "threads": threads},
        "constants": derived_constants(),
        "summary": summary,
        "warnings": sorted({str(w.message) for w in caught}),
        "outputs": {Path(f).name: hashlib.sha256(Path(f).read_bytes()).hexdigest() for f in files},
    }
    with open(out / "manifest.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=_jsonable)
        fh.write("\n")
    return manifest


# --------------------------------------------------------------------- entry point

NUMERIC_ERRORS = (cont.NonConvergence, dyn.IntegrationError, orc.NoOscillation, np.linalg.LinAlgError,
                  FloatingPointError)


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nvdnp", description="NV hyperpolarisation experiments from TOML files.")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment file")
    r.add_argument("spec")
    r.add_argument("--seed", type=int, default=None, help="override the seed in the file")
    r.add_argument("--out", default=None, help="output directory (default: $NVDNP_OUT or ./nvdnp_out)")
    r.add_argument("--threads", type=int, default=1)
    v = sub.add_parser("validate", help="check an experiment file and print the resolved parameters")
    v.add_argument("spec")
    sub.add_parser("constants", help="print derived physical constants")
    return ap


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    if args.command == "constants":
        for k, v in derived_constants().items():
            print(f"{k:24s} {v:.10g}")
        return EXIT_OK
    try:
        spec = load_spec(args.spec)
        if args.command == "validate":
            print(json.dumps(spec.echo(), indent=2, default=_jsonable))
            return EXIT_OK
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            spec.seed = args.seed
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        man = run(spec, args.out, args.threads)
    except (ConfigError, FileNotFoundError, DomainError) as e:
        print(f"nvdnp: configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except NUMERIC_ERRORS as e:
        print(f"nvdnp: numerical failure in {args.spec}: {type(e).__name__}: {e}", file=sys.stderr)
        return EXIT_NUMERIC
    print(json.dumps(man["summary"], indent=2, default=_jsonable))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
