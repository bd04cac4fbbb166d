"""Figures rendered next to the CSV outputs (Agg backend, PNG files)."""

from __future__ import annotations

import os
from fractions import Fraction

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .metrics import compute_latencies, queue_occupancy  # noqa: E402


def _save(fig, path):
    fig.tight_layout()
    # fixed metadata keeps the PNG bytes independent of the matplotlib version string
    fig.savefig(path, dpi=100, metadata={"Software": None})
    plt.close(fig)


def plot_run(trace, out_dir, stem="run"):
    """Latency histogram and queue occupancy over time for one trace."""
    paths = []
    lat = compute_latencies(trace)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    if lat.histogram:
        xs = sorted(lat.histogram)
        ax.bar(xs, [lat.histogram[x] for x in xs], width=1.0, color="tab:blue")
    ax.set_xlabel("latency (rounds)")
    ax.set_ylabel("packets")
    ax.set_title(f"{trace.algorithm.label}, n={trace.config.n}, {trace.adversary_type}")
    p = os.path.join(out_dir, f"{stem}_latency.png")
    _save(fig, p)
    paths.append(p)

    occ = queue_occupancy(trace)
    fig, ax = plt.subplots(figsize=(6, 3.5))
    ax.plot(range(len(occ.total)), occ.total, lw=0.8, color="tab:orange")
    ax.set_xlabel("round")
    ax.set_ylabel("queued packets")
    p = os.path.join(out_dir, f"{stem}_queue.png")
    _save(fig, p)
    paths.append(p)
    return paths


def plot_grid(rows, out_dir, stem="grid"):
    """Observed worst latency against the bound, one marker per summary row."""
    pts = [(float(Fraction(r["bound"])), float(r["max_latency"]), r["algorithm"]) for r in rows
           if r.get("ratio") not in ("", None) and r.get("max_latency") not in ("", None)]
    fig, ax = plt.subplots(figsize=(5, 5))
    algs = sorted({a for _, _, a in pts})
    for a in algs:
        xs = [x for x, _, aa in pts if aa == a]
        ys = [y for _, y, aa in pts if aa == a]
        ax.scatter(xs, ys, s=10, label=a)
    if pts:
        hi = max(max(x for x, _, _ in pts), 1.0)
        ax.plot([1, hi], [1, hi], "k--", lw=0.8)
        ax.set_xscale("log")
        ax.set_yscale("symlog")
        ax.legend(fontsize=7)
    ax.set_xlabel("latency bound")
    ax.set_ylabel("observed max latency")
    p = os.path.join(out_dir, f"{stem}_ratio.png")
    _save(fig, p)
    return [p]
