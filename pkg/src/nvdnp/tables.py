"""CSV output with a fixed dialect so reruns can be compared byte for byte.

Floats are written with ``repr`` (shortest round-trip form), rows end in a
bare LF and there is always a header line.
"""
from __future__ import annotations

import csv
import io
import os
from pathlib import Path

import numpy as np

from .continuum import YieldCurve
from .lattice import Histogram1D, Histogram2D


def _fmt(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        if len(r) != len(header):
            raise ValueError(f"row of length {len(r)} does not match header {header}")
        w.writerow([_fmt(v) for v in r])
    path.parent.mkdir(parents=True, exist_ok=True)
    # newline="" keeps Python from translating the LF on any platform
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())
    return path


def emit_plot_data(result, path, label: str = "") -> Path:
    """Long-format table for one result object, ready for external plotting.

    Yield curves give (scheme, regime, D, P_inf); 1-D histograms give
    (bin_lo, bin_hi, density); 2-D histograms give one row per bin. Anything
    else is treated as a mapping of series label to (x, y) arrays and written
    as (series, x, y). ``None`` or an empty mapping produces only a header.
    """
    if isinstance(result, YieldCurve):
        rows = [(result.scheme.value, result.regime, D, P) for D, P in zip(result.D, result.P_inf)]
        return write_csv(path, ["scheme", "regime", "D", "P_inf"], rows)
    if isinstance(result, Histogram1D):
        dens = result.density
        rows = [(lo, hi, p) for lo, hi, p in zip(result.edges[:-1], result.edges[1:], dens)]
        if label:
            return write_csv(path, ["series", "bin_lo", "bin_hi", "density"], [(label,) + r for r in rows])
        return write_csv(path, ["bin_lo", "bin_hi", "density"], rows)
    if isinstance(result, Histogram2D):
        dens = result.density
        rows = []
        for i, (xl, xh) in enumerate(zip(result.xedges[:-1], result.xedges[1:])):
            for j, (yl, yh) in enumerate(zip(result.yedges[:-1], result.yedges[1:])):
                if result.counts[i, j]:
                    rows.append((xl, xh, yl, yh, dens[i, j]))
        return write_csv(path, ["x_lo", "x_hi", "y_lo", "y_hi", "density"], rows)
    series = result or {}
    rows = []
    for name, (x, y) in series.items():
        rows.extend((name, xi, yi) for xi, yi in zip(np.ravel(x), np.ravel(y)))
    return write_csv(path, ["series", "x", "y"], rows)


def default_output_dir() -> Path:
    return Path(os.environ.get("NVDNP_OUT", "nvdnp_out"))
