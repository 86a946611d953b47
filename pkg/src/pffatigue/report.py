"""Figure rendering for completed runs.

Figures land next to history.csv: the load/force history, the force versus
applied displacement hysteresis, fatigue channels over cycles, and a map of
the final phase field.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import matplotlib.tri as mtri
import numpy as np


def render_figures(metrics, mesh, fields, outdir):
    t = metrics.channel("time")
    u = metrics.channel("u_applied")
    force = metrics.channel("force")

    fig, axes = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    axes[0].plot(t, u, lw=1.0)
    axes[0].set_ylabel("applied displacement [mm]")
    axes[1].plot(t, force, lw=1.0, color="tab:red")
    axes[1].set_ylabel("reaction force [N/mm]")
    axes[1].set_xlabel("time [cycles]")
    fig.tight_layout()
    fig.savefig(outdir / "history.png", dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(5, 4))
    ax.plot(u, force, lw=0.8)
    ax.set_xlabel("applied displacement [mm]")
    ax.set_ylabel("reaction force [N/mm]")
    fig.tight_layout()
    fig.savefig(outdir / "hysteresis.png", dpi=150)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(t, metrics.channel("max_phi"), label="max phase field")
    ax.plot(t, metrics.channel("theta_bar_max")
            / max(metrics.channel("theta_bar_max").max(), 1e-300),
            label="fatigue history (normalised)")
    if np.any(metrics.channel("delta_a") > 0):
        ax.plot(t, metrics.channel("delta_a"), label="crack extension [mm]")
    ax.set_xlabel("time [cycles]")
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(outdir / "fatigue.png", dpi=150)
    plt.close(fig)

    _phase_field_map(mesh, fields.phi, outdir / "phase_field.png")


def _phase_field_map(mesh, phi, path):
    """Final damage field; quads split into triangles for tripcolor."""
    tris = []
    for kind, conn in zip(mesh.kinds, mesh.conn):
        c = list(conn)
        if kind == "quad4":
            tris.append([c[0], c[1], c[2]])
            tris.append([c[0], c[2], c[3]])
        else:
            tris.append(c)
    triang = mtri.Triangulation(mesh.nodes[:, 0], mesh.nodes[:, 1], np.asarray(tris))
    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    img = ax.tripcolor(triang, phi, shading="gouraud", cmap="inferno", vmin=0.0, vmax=1.0)
    fig.colorbar(img, ax=ax, label="phase field")
    ax.set_aspect("equal")
    ax.set_xlabel("x [mm]")
    ax.set_ylabel("y [mm]")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
