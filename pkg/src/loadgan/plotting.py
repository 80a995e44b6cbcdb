"""Report figures: ECDF comparison of aggregated values and annotated fast profiles.

Figures are built on ``matplotlib.figure.Figure`` directly, so no pyplot state
or interactive backend is involved.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.figure import Figure

from .metrics.ecdf import Ecdf
from .metrics.realism import EPS_DIV

_META = {"Software": None}  # keep PNG bytes independent of the installed version


def plot_ecdfs(generated: Ecdf, real: Ecdf, path, ks: float | None = None,
               labels=("generated", "real")):
    fig = Figure(figsize=(6, 4), dpi=100)
    ax = fig.add_subplot()
    for F, label, style in ((generated, labels[0], "-"), (real, labels[1], "--")):
        x, y = F.steps()
        ax.step(np.r_[x[0], x], np.r_[0.0, y], where="post", linestyle=style, label=label)
    title = "ECDF of aggregated load"
    if ks is not None:
        title += f"  (KS = {ks:.3f})"
    ax.set_title(title)
    ax.set_xlabel("average power (kW)")
    ax.set_ylabel("F(x)")
    ax.grid(alpha=0.3)
    ax.legend(loc="lower right")
    fig.tight_layout()
    fig.savefig(Path(path), metadata=_META)
    return path


def plot_profiles(profiles, path, m: int | None = None, n: int = 3, resolution_min: float = 1.0,
                  eps_div: float = EPS_DIV):
    """Plot the first ``n`` profiles and label every consecutive change beyond
    the profile's median absolute change with its percent value."""
    P = np.atleast_2d(np.asarray(profiles, dtype=np.float64))[:n]
    fig = Figure(figsize=(7, 2.2 * len(P) + 0.5), dpi=100)
    axes = fig.subplots(len(P), 1, squeeze=False)[:, 0]
    t = np.arange(P.shape[1]) * resolution_min
    for ax, prof in zip(axes, P):
        ax.plot(t, prof, marker="o", ms=3)
        prev, cur = prof[:-1], prof[1:]
        ok = np.abs(prev) > eps_div
        if m:
            # steps across slow-interval boundaries are not constrained
            ok &= (np.arange(1, prof.size) % m) != 0
        pct = np.full(prev.shape, np.nan)
        pct[ok] = 100.0 * (cur[ok] - prev[ok]) / prev[ok]
        if np.isfinite(pct).any():
            cut = np.nanmedian(np.abs(pct))
            for i in np.flatnonzero(np.isfinite(pct) & (np.abs(pct) >= cut)):
                ax.annotate(f"{pct[i]:+.0f}%", (t[i + 1], cur[i]), fontsize=7,
                            textcoords="offset points", xytext=(0, 5), ha="center")
        ax.set_ylabel("kW")
        ax.grid(alpha=0.3)
    axes[0].set_title("generated fast profiles (percent change per step)")
    axes[-1].set_xlabel("minutes")
    fig.tight_layout()
    fig.savefig(Path(path), metadata=_META)
    return path
