"""Figure and plot-data output for solver reports."""

from __future__ import annotations

import os

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def write_dat(path, x, y):
    """Two-column whitespace-separated data file."""
    np.savetxt(path, np.column_stack([x, y]), fmt="%.17g")
    return path


def plot_states(outdir, stem, x, states, energies=None, potential=None, title=None, xlabel="x"):
    """Eigenfunctions (offset by their energies when given) over an optional potential.

    Writes ``<stem>.png`` and one ``<stem>_<label>.dat`` per curve; returns the paths.
    """
    os.makedirs(outdir, exist_ok=True)
    plt = _pyplot()
    written = []
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    peak = max((np.max(np.abs(y)) for y in states.values()), default=1.0) or 1.0
    spacing = np.min(np.diff(energies)) if energies is not None and len(energies) > 1 else 1.0
    for i, (label, y) in enumerate(states.items()):
        base = energies[i] if energies is not None else 0.0
        ax.plot(x, base + 0.4 * spacing * np.asarray(y) / peak, lw=1.2, label=label)
        written.append(write_dat(os.path.join(outdir, f"{stem}_{label}.dat"), x, y))
    if potential is not None:
        v = np.asarray(potential)
        top = energies[-1] + spacing if energies is not None else np.nanmax(v)
        ax.plot(x, np.where(v <= top, v, np.nan), "k-", lw=0.8, label="V")
        written.append(write_dat(os.path.join(outdir, f"{stem}_V.dat"), x, v))
        if energies is not None:
            ax.set_ylim(min(np.nanmin(v), energies[0] - spacing), top)
    ax.set_xlabel(xlabel)
    ax.set_ylabel("energy / scaled state")
    if title:
        ax.set_title(title, fontsize=10)
    ax.legend(fontsize=8, loc="upper right")
    fig.tight_layout()
    png = os.path.join(outdir, f"{stem}.png")
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return [png] + written


def plot_differences(outdir, stem, rows, key="vs_analytic"):
    """Per-level relative spectrum differences for each scheme on a log axis."""
    os.makedirs(outdir, exist_ok=True)
    plt = _pyplot()
    written = []
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for row in rows:
        comp = row.get(key)
        if comp is None:
            continue
        d = np.maximum(np.asarray(comp["rel_diffs"], dtype=float), 1e-17)
        n = np.arange(d.size)
        ax.semilogy(n, d, "o-", label=row["scheme"][:24])
        safe = "".join(c if c.isalnum() else "_" for c in row["scheme"])[:24]
        written.append(write_dat(os.path.join(outdir, f"{stem}_{safe}.dat"), n, d))
        ax.axhline(comp["rel_tol"], color="0.5", ls="--", lw=0.8)
    ax.set_xlabel("level n")
    ax.set_ylabel("relative difference")
    ax.legend(fontsize=8)
    fig.tight_layout()
    png = os.path.join(outdir, f"{stem}.png")
    fig.savefig(png, dpi=120)
    plt.close(fig)
    return [png] + written
