"""Figure rendering for finished trace files.

Reads the delimited trace written by the runner and saves convergence
figures next to it: the fixed-point residual curve, the two sides of the
per-step quasi-Fejer inequality when a reference point was supplied, and
the forward-drift partial sums.  The CSV stays the machine-readable
contract; figures are a human-facing supplement.
"""

import os

import matplotlib
import numpy as np

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["render_trace_figures"]


def _load_trace(csv_path):
    data = np.genfromtxt(csv_path, delimiter=",", names=True)
    if data.ndim == 0:
        data = data.reshape(1)
    return data


def render_trace_figures(csv_path, out_dir=None, fmt="png", stem=None):
    """Render figures for a trace CSV; returns the list of written paths."""
    data = _load_trace(csv_path)
    out_dir = out_dir or os.path.dirname(os.path.abspath(csv_path))
    os.makedirs(out_dir, exist_ok=True)
    stem = stem or os.path.splitext(os.path.basename(csv_path))[0]
    written = []
    n = data["n"]

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    resid = np.maximum(data["residual"], 1e-300)
    ax.semilogy(n, resid, lw=1.2)
    ax.set_xlabel("iteration")
    ax.set_ylabel("fixed-point residual")
    ax.set_title("Convergence")
    ax.grid(True, which="both", alpha=0.3)
    path = os.path.join(out_dir, f"{stem}_residual.{fmt}")
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    written.append(path)

    lhs, rhs = data["fejer_lhs"], data["fejer_rhs"]
    mask = np.isfinite(lhs) & np.isfinite(rhs)
    if np.any(mask):
        fig, axes = plt.subplots(1, 2, figsize=(10.0, 4.0))
        axes[0].semilogy(n[mask], np.maximum(lhs[mask], 1e-300), label="left side")
        axes[0].semilogy(n[mask], np.maximum(rhs[mask], 1e-300), "--", label="right side")
        axes[0].set_xlabel("iteration")
        axes[0].set_ylabel("metric distance to reference")
        axes[0].set_title("Quasi-Fejer inequality")
        axes[0].legend()
        axes[0].grid(True, which="both", alpha=0.3)
        axes[1].plot(n[mask], rhs[mask] - lhs[mask], lw=1.0)
        axes[1].axhline(0.0, color="k", lw=0.8)
        axes[1].set_xlabel("iteration")
        axes[1].set_ylabel("margin (right - left)")
        axes[1].set_title("Per-step margin")
        axes[1].grid(True, alpha=0.3)
        path = os.path.join(out_dir, f"{stem}_fejer.{fmt}")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    drift = data["b_drift_partial_sum"]
    mask = np.isfinite(drift)
    if np.any(mask):
        fig, ax = plt.subplots(figsize=(6.0, 4.0))
        ax.plot(n[mask], drift[mask], lw=1.2)
        ax.set_xlabel("iteration")
        ax.set_ylabel("cumulative squared forward drift")
        ax.set_title("Forward-drift partial sums")
        ax.grid(True, alpha=0.3)
        path = os.path.join(out_dir, f"{stem}_drift.{fmt}")
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
        written.append(path)

    return written
