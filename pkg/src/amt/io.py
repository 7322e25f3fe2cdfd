"""CSV and SVG writers.

CSV files follow RFC 4180 (CRLF line ends, mandatory header row) preceded by
metadata comment lines starting with ``#``. Floats are written with
``repr`` so that output is exact and byte-for-byte reproducible.
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .geometry import GeometrySample


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return str(bool(x)).lower()
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    return str(x)


def format_csv(header, rows, metadata=None):
    buf = io.StringIO(newline="")
    for key, value in (metadata or {}).items():
        buf.write(f"# {key} = {value}\r\n")
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(x) for x in row])
    return buf.getvalue()


def write_csv(path, header, rows, metadata=None):
    path = Path(path)
    text = format_csv(header, rows, metadata)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(text)
    return path


def read_csv(path):
    """Return (metadata dict, header, rows-as-strings); the inverse of :func:`write_csv`."""
    meta, lines = {}, []
    with open(path, newline="", encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition(" = ")
                meta[key] = value
            else:
                lines.append(line)
    rows = list(csv.reader(lines))
    return meta, rows[0], rows[1:]


# -- row builders ---------------------------------------------------------

def geometry_rows(samples):
    return GeometrySample.FIELDS, [s.row() for s in samples]


def trajectory_rows(traj, max_populations=8):
    """Columns t, norm, mean_n, P{n}... with n the physical level index."""
    levels = traj.basis.level_numbers()[:max_populations]
    header = ["t", "norm", "mean_n"] + [f"P{n}" for n in levels]
    pops = traj.populations
    norms = traj.norms
    mean_n = traj.mean_n
    rows = [[t, norms[k], mean_n[k], *pops[k, :len(levels)]]
            for k, t in enumerate(traj.times)]
    return header, rows


CROSSOVER_HEADER = ("xi", "p_bar_raw", "p_bar_normalized", "eta", "u", "family",
                    "normalization")


def crossover_rows(curve):
    rows = [[p.xi, p.p_bar_raw, p.p_bar, p.eta_used, p.u_used, curve.family,
             curve.normalization.value] for p in curve.points]
    return CROSSOVER_HEADER, rows


def convergence_rows(report):
    header = ["xi"] + [f"p_bar_N{n}" for n in report.n_values]
    header += [f"dev_N{a}_N{b}" for a, b in report.max_pairwise_deviation]
    rows = []
    for i, xi in enumerate(report.xi_grid):
        row = [xi] + [report.curves[n][i] for n in report.n_values]
        row += [abs(report.curves[a][i] - report.curves[b][i])
                for a, b in report.max_pairwise_deviation]
        rows.append(row)
    return header, rows


# -- SVG ------------------------------------------------------------------

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


def crossover_svg(curves, labels, marker=0.25, title="AMT crossover",
                  width=640, height=440):
    """Self-contained SVG of normalized activation vs xi (log axis)."""
    left, right, top, bottom = 70, 20, 40, 60
    pw, ph = width - left - right, height - top - bottom
    xs = np.concatenate([c.xi for c in curves])
    x_lo, x_hi = math.log10(min(xs.min(), marker)), math.log10(max(xs.max(), marker))
    if x_hi - x_lo < 1e-9:
        x_lo, x_hi = x_lo - 0.5, x_hi + 0.5
    ys = np.concatenate([c.p_bar for c in curves])
    y_hi = max(1.05, float(ys.max()) * 1.05)

    def sx(x):
        return left + pw * (math.log10(x) - x_lo) / (x_hi - x_lo)

    def sy(y):
        return top + ph * (1.0 - y / y_hi)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
        f'<text x="{width / 2:.1f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for dec in range(math.floor(x_lo), math.ceil(x_hi) + 1):
        for mult in (1, 2, 5):
            x = mult * 10.0**dec
            if x_lo - 1e-12 <= math.log10(x) <= x_hi + 1e-12:
                px = sx(x)
                out.append(f'<line x1="{px:.2f}" y1="{top + ph}" x2="{px:.2f}" '
                           f'y2="{top + ph + 5}" stroke="black"/>')
                out.append(f'<text x="{px:.2f}" y="{top + ph + 18}" '
                           f'text-anchor="middle">{x:g}</text>')
    for k in range(6):
        y = y_hi * k / 5
        py = sy(y)
        out.append(f'<line x1="{left - 5}" y1="{py:.2f}" x2="{left}" y2="{py:.2f}" stroke="black"/>')
        out.append(f'<text x="{left - 8}" y="{py + 4:.2f}" text-anchor="end">{y:.2f}</text>')
    out.append(f'<text x="{left + pw / 2:.1f}" y="{height - 15}" text-anchor="middle">'
               'xi = eta / U</text>')
    out.append(f'<text x="18" y="{top + ph / 2:.1f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {top + ph / 2:.1f})">normalized activation</text>')
    mx = sx(marker)
    out.append(f'<line x1="{mx:.2f}" y1="{top}" x2="{mx:.2f}" y2="{top + ph}" '
               'stroke="gray" stroke-dasharray="6,4"/>')
    for i, (curve, label) in enumerate(zip(curves, labels)):
        color = _COLORS[i % len(_COLORS)]
        pts = " ".join(f"{sx(x):.2f},{sy(y):.2f}" for x, y in zip(curve.xi, curve.p_bar))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        for x, y in zip(curve.xi, curve.p_bar):
            out.append(f'<circle cx="{sx(x):.2f}" cy="{sy(y):.2f}" r="2.5" fill="{color}"/>')
        ly = top + 16 + 18 * i
        out.append(f'<line x1="{left + 14}" y1="{ly}" x2="{left + 40}" y2="{ly}" '
                   f'stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{left + 46}" y="{ly + 4}">{label}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
