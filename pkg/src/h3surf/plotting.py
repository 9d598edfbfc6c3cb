"""Static figures written next to the CSV/JSON reports.

Figures are built with ``matplotlib.figure.Figure`` and the Agg canvas, so no
display or pyplot state is involved. PNG metadata is stripped to keep the
files reproducible.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
from matplotlib.backends.backend_agg import FigureCanvasAgg
from matplotlib.figure import Figure

FIGSIZE = (5.0, 3.8)


def _new(nrows=1, ncols=1, figsize=FIGSIZE):
    fig = Figure(figsize=figsize, dpi=110, layout="constrained")
    FigureCanvasAgg(fig)
    axes = fig.subplots(nrows, ncols)
    return fig, axes


def _save(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Software": None})
    return path


def field_map(U, V, values, path, title="", labels=("u", "v"), cmap="viridis"):
    """Filled contour of a scalar field over a parameter grid."""
    fig, ax = _new()
    values = np.asarray(values, dtype=float)
    span = np.ptp(values[np.isfinite(values)]) if np.any(np.isfinite(values)) else 0.0
    if span < 1e-14:
        # contourf needs a non-degenerate range; show the constant as a flat map
        im = ax.pcolormesh(U, V, values, shading="auto", cmap=cmap)
    else:
        im = ax.contourf(U, V, values, levels=20, cmap=cmap)
    fig.colorbar(im, ax=ax)
    ax.set_xlabel(labels[0])
    ax.set_ylabel(labels[1])
    ax.set_title(title)
    return _save(fig, path)


def eigen_fit(r, lap, lam, path):
    """Scatter of the scalar Laplacian of each coordinate against the
    coordinate, with the fitted line lap = lam * r."""
    fig, axes = _new(1, 3, figsize=(9.0, 3.0))
    for i, ax in enumerate(axes):
        ri = np.asarray(r[..., i]).ravel()
        li = np.asarray(lap[..., i]).ravel()
        ax.plot(ri, li, ".", ms=2, color="0.3")
        if lam[i] is not None:
            xs = np.array([ri.min(), ri.max()])
            ax.plot(xs, lam[i] * xs, "-", color="C3", lw=1, label=f"lambda = {lam[i]:.6g}")
            ax.legend(loc="best")
        ax.set_xlabel(f"r{i + 1}")
        ax.set_ylabel(f"lap r{i + 1}")
    return _save(fig, path)


def convergence(history, path, title="Newton residual"):
    fig, ax = _new()
    h = np.maximum(np.asarray(history, dtype=float), 1e-300)
    ax.semilogy(np.arange(len(h)), h, "o-", ms=3)
    ax.set_xlabel("iteration")
    ax.set_ylabel("max |residual|")
    ax.set_title(title)
    return _save(fig, path)


def profile_curve(t, a, path, title="profile a(t)"):
    fig, ax = _new()
    ax.plot(t, a, "-")
    ax.set_xlabel("t")
    ax.set_ylabel("a")
    ax.set_title(title)
    return _save(fig, path)
