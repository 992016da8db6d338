"""Report figures: learning curves, amplitude comparison, scaling.

matplotlib is imported lazily and always with the Agg backend, so the rest of
the package never needs a display or the plotting dependency.
"""
from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

STYLE = {
    "figure.figsize": (5.0, 3.4),
    "figure.dpi": 120,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "font.size": 9,
    "legend.fontsize": 8,
    "legend.frameon": False,
}


def _pyplot():
    import matplotlib
    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt
    return plt


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path)
    _pyplot().close(fig)
    return path


def learning_curve(costs: Sequence[float] | dict[str, Sequence[float]], path, title: str = "") -> Path:
    """Cost against function evaluations, log-scaled; one line per run."""
    plt = _pyplot()
    runs = costs if isinstance(costs, dict) else {"": costs}
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        for label, c in runs.items():
            c = np.maximum(np.asarray(c, dtype=float), 1e-16)
            ax.semilogy(np.arange(c.size), np.minimum.accumulate(c), lw=1.2, label=label or None)
        ax.set_xlabel("function evaluations")
        ax.set_ylabel("cost (best so far)")
        if title:
            ax.set_title(title)
        if any(runs):
            ax.legend()
        return _save(fig, path)


def amplitudes(vqls: np.ndarray, classical: np.ndarray, path, title: str = "") -> Path:
    """Bar comparison of |x| from the variational and the direct solve.

    Global phase is removed by aligning the largest classical amplitude.
    """
    plt = _pyplot()
    v = np.asarray(vqls, dtype=complex)
    c = np.asarray(classical, dtype=complex)
    i = int(np.argmax(np.abs(c)))
    if abs(v[i]) > 0:
        v = v * np.exp(1j * (np.angle(c[i]) - np.angle(v[i])))
    idx = np.arange(c.size)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.bar(idx - 0.2, c.real, width=0.4, label="classical")
        ax.bar(idx + 0.2, v.real, width=0.4, label="variational")
        ax.set_xlabel("basis index")
        ax.set_ylabel("amplitude (real part)")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def scaling(workers: Sequence[int], times: Sequence[float], path, title: str = "") -> Path:
    """Measured wall time per cost evaluation against worker count, with the
    ideal 1/W line through the first point."""
    plt = _pyplot()
    w = np.asarray(workers, dtype=float)
    t = np.asarray(times, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        ax.loglog(w, t, "o-", label="measured")
        ax.loglog(w, t[0] * w[0] / w, "--", color="0.5", label="ideal")
        ax.set_xlabel("workers")
        ax.set_ylabel("wall time per evaluation (s)")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)


def weak_scaling(labels: Sequence[str], t_norm: Sequence[float], baseline: float, path, title: str = "") -> Path:
    plt = _pyplot()
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots()
        x = np.arange(len(labels))
        ax.plot(x, t_norm, "o-", label="normalised")
        ax.axhline(baseline, ls="--", color="0.5", label="ideal")
        ax.set_xticks(x, labels)
        ax.set_xlabel("configuration")
        ax.set_ylabel("time (s)")
        if title:
            ax.set_title(title)
        ax.legend()
        return _save(fig, path)
