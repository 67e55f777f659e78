"""SVG figures from the tables written by :func:`oulab.harness.write_results`."""
from __future__ import annotations

import csv
import math
import os
import warnings

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

KINDS = ("decay", "scan", "spectrum", "sweep")


def read_table(path):
    """Rows (as dicts of strings) and ``# key=value`` header entries of a CSV file."""
    header, lines = {}, []
    if not os.path.exists(path):
        return [], header
    with open(path, newline="") as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].strip().partition("=")
                header[k.strip()] = v.strip()
            elif line.strip():
                lines.append(line)
    if not lines:
        return [], header
    return list(csv.DictReader(lines)), header


def _num(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        return math.nan


def _decay(ax, rows):
    groups = {}
    for r in rows:
        groups.setdefault((r.get("check_id", ""), r.get("kind", "")), []).append(r)
    for (cid, kind), rs in sorted(groups.items()):
        t = [_num(r["t"]) for r in rs]
        v = [_num(r["value"]) for r in rs]
        e = [_num(r.get("std_error")) for r in rs]
        pts = [(a, b, c) for a, b, c in zip(t, v, e) if b > 0]
        if not pts:
            continue
        t, v, e = zip(*sorted(pts))
        label = f"{cid} {kind}"
        if len(t) > 1:
            slope = (math.log(v[-1]) - math.log(v[0])) / (t[-1] - t[0])
            label += f" (slope {slope:.3f})"
        ax.errorbar(t, v, yerr=e, marker="o", ms=3, capsize=2, label=label)
        exact = [(a, _num(r.get("exact"))) for a, r in zip(t, rs)]
        exact = [(a, b) for a, b in exact if b > 0]
        if exact:
            ax.plot(*zip(*exact), "k+", ms=8)
    ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("value")


def _scan(ax, rows):
    for key, style in (("norm", "-"), ("energy_norm", "--")):
        pts = sorted((_num(r["t"]), _num(r.get(key))) for r in rows if key in r)
        if pts:
            ax.plot(*zip(*pts), style, label=key)
    ax.set_xscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("||(I - it Pi)^-1||")


def _spectrum(ax, rows):
    for source, marker in (("grid", "o"), ("chaos", "x")):
        pts = [(_num(r["re"]), _num(r["im"])) for r in rows if r.get("source") == source]
        if pts:
            ax.scatter(*zip(*pts), marker=marker, s=18, label=source)
    ax.axhline(0.0, color="0.7", lw=0.5)
    ax.set_xlabel("Re")
    ax.set_ylabel("Im")


def _sweep(ax, rows):
    pts = sorted((_num(r["eps"]), abs(_num(r["gap"])), _num(r.get("gap_se"))) for r in rows)
    if pts:
        eps, gap, se = zip(*pts)
        ax.errorbar(eps, gap, yerr=se, marker="o", capsize=2, label="|gap|")
    ax.set_xscale("log")
    ax.set_yscale("log")
    ax.set_xlabel("eps")
    ax.set_ylabel("|P_eps f~ - P_Omega f|")


_DRAW = {"decay": _decay, "scan": _scan, "spectrum": _spectrum, "sweep": _sweep}


def plot_kind(results_csv, kind, out_dir=None):
    """Draw the ``kind`` table that sits next to ``results_csv``; returns the SVG path.

    A missing or empty table yields an empty figure and a warning.
    """
    if kind not in _DRAW:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {', '.join(KINDS)}")
    base = os.path.dirname(os.path.abspath(results_csv))
    _, header = read_table(results_csv)
    rows, theader = read_table(os.path.join(base, f"{kind}.csv"))
    header = {**theader, **header}
    out_dir = out_dir or base
    os.makedirs(out_dir, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    if rows:
        _DRAW[kind](ax, rows)
        if ax.get_legend_handles_labels()[0]:
            ax.legend(fontsize=7)
    else:
        warnings.warn(f"no {kind} data found for {results_csv}; writing an empty plot", stacklevel=2)
        ax.text(0.5, 0.5, "no data", ha="center", va="center", transform=ax.transAxes)
    tag = f"config_hash={header.get('config_hash', '')} version={header.get('version', '')}"
    ax.set_title(kind, fontsize=9)
    fig.text(0.01, 0.01, tag, fontsize=5, color="0.5")
    path = os.path.join(out_dir, f"{kind}.svg")
    with matplotlib.rc_context({"svg.hashsalt": header.get("config_hash", "oulab")}):
        fig.savefig(path, format="svg", metadata={"Date": None, "Description": tag})
    plt.close(fig)
    return path
