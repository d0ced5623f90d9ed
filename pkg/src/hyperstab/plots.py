"""SVG figure helpers (one plot per file, no external assets)."""

from __future__ import annotations

import matplotlib

matplotlib.use("svg")

import matplotlib.pyplot as plt  # noqa: E402


def svg_norm_series(times, series, path, title="norm growth", logy=True):
    """Plot named norm time-series to an SVG file."""
    fig, ax = plt.subplots(figsize=(7, 4.2))
    for name, vals in sorted(series.items()):
        ax.plot(times, vals, label=name, lw=1.2)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel("t")
    ax.set_ylabel("norm")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def svg_characteristic_diagram(tree, path, max_depth=None):
    """Node times with the slow-family characteristic lines.

    Every 1-edge is a straight characteristic of slope 1/r1 from (0, child
    time) to (1, parent time); 2-edges are drawn dotted at the fast speed.
    """
    cfg = tree.config
    fig, ax = plt.subplots(figsize=(6, 8))
    t_top = cfg.T_float * 1.02
    for nd in tree.nodes.values():
        if max_depth is not None and nd.depth > max_depth:
            continue
        t = float(nd.time)
        ax.plot([0.0], [t], "k.", ms=3)
        if nd.depth == 0:
            continue
        parent = tree.nodes[nd.word[:-1]]
        tp = float(parent.time)
        if nd.word[-1] == 1:
            ax.plot([0.0, 1.0], [t, tp], "b--", lw=0.6, alpha=0.7)
        else:
            ax.plot([0.0, 1.0], [t, tp], "r:", lw=0.6, alpha=0.7)
    ax.set_xlim(-0.02, 1.02)
    ax.set_ylim(0.0, t_top)
    ax.set_xlabel("x")
    ax.set_ylabel("t")
    ax.set_title("characteristic lattice (dashed: slow family, slope 1/r1)")
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def svg_trace(signal, path, title="boundary trace", components=None):
    fig, ax = plt.subplots(figsize=(7, 4.2))
    t = signal.times()
    for j in range(signal.ncomp):
        if components is not None and j not in components:
            continue
        ax.plot(t, signal.values[:, j], lw=0.8, label=f"v{j + 1}")
    ax.set_xlabel("t")
    ax.set_ylabel("v")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
