"""SVG figures for an experiment bundle (matplotlib, Agg backend, no timestamps)."""
from __future__ import annotations

import math

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "twisty"
    import matplotlib.pyplot as plt

    return plt


def _save(plt, fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None}, bbox_inches="tight")
    plt.close(fig)


def write_all(bundle):
    plt = _pyplot()
    out = bundle.directory
    written = []
    if bundle.series is not None:
        fig, ax = plt.subplots(figsize=(8, 2.5))
        n = min(len(bundle.series), 4000)
        ax.plot(bundle.series.times[:n], bundle.series.values[:n], lw=0.7)
        ax.set_xlabel("t")
        ax.set_ylabel("g(t)")
        _save(plt, fig, out / "series.svg")
        written.append("series.svg")
    if bundle.cloud is not None:
        from .slidingwindow import pca_project

        idx = bundle.landmarks.indices
        k = min(2, bundle.cloud.dim)
        Y, _ = pca_project(bundle.cloud.subset(idx), k)
        fig, ax = plt.subplots(figsize=(4, 4))
        y2 = Y.points[:, 1] if k > 1 else np.zeros(len(Y))
        ax.scatter(Y.points[:, 0], y2, c=bundle.cloud.times[idx], s=4, cmap="viridis")
        ax.set_title("sliding window cloud, PCA")
        _save(plt, fig, out / "cloud_pca.svg")
        written.append("cloud_pca.svg")
    for p, result in sorted(bundle.persistence.items()):
        fig, ax = plt.subplots(figsize=(4, 4))
        top = result.threshold
        for dgm in result.diagrams:
            pairs = dgm.pairs
            if not len(pairs):
                continue
            death = np.where(np.isinf(pairs[:, 1]), top, pairs[:, 1])
            ax.scatter(pairs[:, 0], death, s=8, label=f"H{dgm.dim}")
        ax.plot([0, top], [0, top], "k-", lw=0.5)
        ax.axhline(top, color="gray", ls=":", lw=0.5)
        ax.set_xlabel("birth")
        ax.set_ylabel("death")
        ax.set_title(f"Z/{p}")
        ax.legend(loc="lower right")
        _save(plt, fig, out / f"persistence_z{p}.svg")
        written.append(f"persistence_z{p}.svg")
    if bundle.circular is not None:
        fig, axes = plt.subplots(1, bundle.circular.shape[1], figsize=(4 * bundle.circular.shape[1], 3),
                                 squeeze=False)
        t = bundle.cloud.times[: len(bundle.cloud)]
        step = max(1, -(-len(bundle.cloud) // bundle.config.coordinates.max_queries))
        t = t[::step][: len(bundle.circular)]
        for i, ax in enumerate(axes[0]):
            ax.scatter(t, bundle.circular[:, i], s=2)
            ax.set_ylim(0, 2 * math.pi)
            ax.set_xlabel("t")
            ax.set_ylabel(f"angle {i}")
        _save(plt, fig, out / "circular.svg")
        written.append("circular.svg")
    if bundle.projective is not None and bundle.projective.shape[1] == 3:
        from .coordinates import rp2_stereograph

        fig, axes = plt.subplots(1, 2, figsize=(8, 4))
        for ax, axis in zip(axes, ((0, 0, 1), (1, 0, 0))):
            Z = rp2_stereograph(bundle.projective, axis)
            ax.scatter(Z[:, 0], Z[:, 1], c=np.arange(len(Z)), s=3, cmap="viridis")
            ax.add_patch(plt.Circle((0, 0), 1, fill=False, lw=0.5))
            ax.set_aspect("equal")
            ax.set_title(f"RP2, hemisphere axis {axis}")
        _save(plt, fig, out / "projective.svg")
        written.append("projective.svg")
    return written
