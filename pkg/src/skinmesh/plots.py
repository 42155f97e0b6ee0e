"""Matplotlib renderings of tables, regions, runs, and check reports.

Every function writes a PNG next to the delimited output and returns the
path it wrote.  The Agg backend is forced so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def plot_interval_tables(edge_rows, triangle_rows, path):
    """Travel fraction and damped-free interval against element headroom."""
    fig, (ax_theta, ax_dt) = plt.subplots(1, 2, figsize=(9.0, 3.6))
    for rows, label, marker in ((edge_rows, "edges", "o"), (triangle_rows, "triangles", "s")):
        headroom = [r[0] for r in rows]
        ax_theta.plot(headroom, [r[1] for r in rows], marker=marker, label=label)
        ax_dt.plot(headroom, [r[2] for r in rows], marker=marker, label=label)
    ax_theta.set_xlabel("headroom factor")
    ax_theta.set_ylabel("travel fraction")
    ax_dt.set_xlabel("headroom factor")
    ax_dt.set_ylabel("interval / length scale$^2$")
    for ax in (ax_theta, ax_dt):
        ax.grid(True, alpha=0.3)
        ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_feasible_region(cs, qs, grid, path):
    """Feasible cells of the constant grid, c horizontal, q vertical."""
    fig, ax = plt.subplots(figsize=(5.4, 4.4))
    mesh = ax.pcolormesh(
        np.asarray(cs),
        np.asarray(qs),
        np.asarray(grid, dtype=float).T,
        cmap="RdYlGn",
        vmin=0.0,
        vmax=1.0,
        shading="nearest",
    )
    fig.colorbar(mesh, ax=ax, label="feasible")
    ax.set_xlabel("spacing constant c")
    ax.set_ylabel("quality constant q")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_growth(summary, path):
    """Mesh size and cumulative scheduler work across the growth window."""
    snapshots = summary.get("snapshots", [])
    fig, (ax_mesh, ax_sched) = plt.subplots(2, 1, figsize=(6.4, 5.6), sharex=True)
    ts = [row["t"] for row in snapshots]
    ax_mesh.plot(ts, [row["vertices"] for row in snapshots], marker="o", label="vertices")
    ax_mesh.plot(ts, [row["triangles"] for row in snapshots], marker="s", label="triangles")
    ax_mesh.set_ylabel("count")
    ax_mesh.legend()
    ax_mesh.grid(True, alpha=0.3)
    ax_sched.plot(ts, [row["checks"] for row in snapshots], marker="o", label="checks")
    ax_sched.plot(
        ts, [row["contractions"] for row in snapshots], marker="v", label="contractions"
    )
    ax_sched.plot(ts, [row["insertions"] for row in snapshots], marker="^", label="insertions")
    ax_sched.set_xlabel("growth time")
    ax_sched.set_ylabel("cumulative events")
    ax_sched.legend()
    ax_sched.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_mesh(mesh, path, title=None):
    """3D rendering of one triangulated snapshot."""
    order = sorted(mesh.vertices)
    lookup = {vid: i for i, vid in enumerate(order)}
    coords = np.array([mesh.vertices[vid].world for vid in order])
    triangles = [[lookup[v] for v in tri] for tri in mesh.triangles]
    fig = plt.figure(figsize=(5.6, 5.2))
    ax = fig.add_subplot(projection="3d")
    if triangles:
        ax.plot_trisurf(
            coords[:, 0],
            coords[:, 1],
            coords[:, 2],
            triangles=triangles,
            cmap="viridis",
            edgecolor="k",
            linewidth=0.2,
            alpha=0.9,
        )
    if title:
        ax.set_title(title)
    ax.set_box_aspect((1, 1, 1))
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_verification(report, path):
    """Headline numbers of one check report as a labeled bar chart."""
    skip = {"mode", "violations", "passed", "windows_detail", "patch_counts"}
    items = [
        (key, value)
        for key, value in report.items()
        if key not in skip and isinstance(value, (int, float))
    ]
    fig, ax = plt.subplots(figsize=(7.2, 0.6 * len(items) + 1.6))
    labels = [key for key, _ in items]
    values = [value for _, value in items]
    colors = ["tab:green" if report.get("passed") else "tab:red"] * len(items)
    ax.barh(labels, values, color=colors, alpha=0.75)
    for i, value in enumerate(values):
        ax.annotate(f"{value:.3g}", (value, i), textcoords="offset points", xytext=(4, -3))
    ax.set_title(f"{report.get('mode', 'report')}: {'pass' if report.get('passed') else 'FAIL'}")
    ax.set_xscale("symlog", linthresh=1e-12)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
