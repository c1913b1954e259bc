"""Report figures, rendered straight to files with the Agg backend."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .reporting import CCDF_GRID  # noqa: E402

STYLE = {
    "font.size": 10,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.bbox": "tight",
    "svg.hashsalt": "osnrnn",  # stable SVG ids
}


def _save(fig, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, metadata={"Date": None} if path.suffix == ".svg" else None)
    plt.close(fig)
    return path


def plot_ccdf(curves: dict[str, np.ndarray], path, grid=CCDF_GRID, xlabel="|error| (dB)"):
    """Semilog CCDF of absolute error, one line per curve."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        for label, y in curves.items():
            y = np.asarray(y, dtype=float)
            mask = y > 0
            ax.semilogy(np.asarray(grid)[mask], y[mask], label=label)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("CCDF")
        ax.set_xlim(0, float(grid[-1]))
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_estimate_scatter(true_db, est_db, valid, path, label="OSNR"):
    true_db, est_db, valid = map(np.asarray, (true_db, est_db, valid))
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(3.8, 3.6))
        ax.plot(true_db[valid], est_db[valid], ".", ms=4, label="valid")
        if np.any(~valid):
            ax.plot(true_db[~valid], est_db[~valid], "x", ms=4, color="C3", label="flagged")
        lo = float(np.nanmin(np.concatenate([true_db, est_db]))) - 1
        hi = float(np.nanmax(np.concatenate([true_db, est_db]))) + 1
        ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
        ax.set_xlabel(f"true {label} (dB)")
        ax.set_ylabel(f"estimated {label} (dB)")
        ax.legend(frameon=False, loc="upper left")
        return _save(fig, path)


def plot_history(train_loss, val_loss, path):
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ep = np.arange(1, len(train_loss) + 1)
        ax.semilogy(ep, train_loss, label="train")
        ax.semilogy(ep, val_loss, label="validation")
        ax.set_xlabel("epoch")
        ax.set_ylabel("MSE (dB$^2$)")
        ax.legend(frameon=False)
        return _save(fig, path)


def plot_error_histogram(errors, path, label="OSNR error (dB)"):
    errors = np.asarray(errors, dtype=float)
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.hist(errors, bins=30)
        ax.axvline(float(np.mean(errors)) if errors.size else 0.0, color="k", lw=0.8)
        ax.set_xlabel(label)
        ax.set_ylabel("count")
        return _save(fig, path)
