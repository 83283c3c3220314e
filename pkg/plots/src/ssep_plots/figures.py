"""Figure builders over validated run-directory tables.

Rendering is deterministic: fixed style, no RNG, Agg backend, constant
metadata; identical inputs give byte-identical PNGs.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .readers import SchemaError, read_summary, read_table, run_label

_SAVE_KW = dict(dpi=130, metadata={"Software": "ssep-plot"})


def _finish(fig, out_path):
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(out_path, **_SAVE_KW)
    plt.close(fig)


def plot_profiles(run_dir, out_path) -> None:
    """Empirical density with its confidence band, overlaid with the lattice
    solution, the continuum solution, and the stationary line."""
    dens = read_table(Path(run_dir) / "density.csv", "density")
    fig, ax = plt.subplots(figsize=(7.2, 4.4))
    x = dens["x"]
    ax.errorbar(x, dens["mean"], yerr=4.0 * dens["stderr"], fmt=".", ms=3,
                lw=0.6, color="#1f77b4", ecolor="#9ecae1", label="empirical (4 s.e.)")
    ref_path = Path(run_dir) / "pde.csv"
    if ref_path.exists():
        ref = read_table(ref_path, "reference")
        ax.plot(ref["x"], ref["rho_discrete"], "-", color="#d62728", lw=1.2,
                label="lattice equation")
        ax.plot(ref["x"], ref["rho_continuum"], "--", color="#2ca02c", lw=1.2,
                label="continuum solution")
        ax.plot(ref["x"], ref["rho_stationary"], ":", color="#7f7f7f", lw=1.2,
                label="stationary line")
    ax.set_xlabel("site x")
    ax.set_ylabel("density")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(f"density profile ({run_label(dens.meta)})", fontsize=10)
    ax.legend(loc="best", fontsize=8)
    ax.grid(alpha=0.25, lw=0.4)
    _finish(fig, out_path)


def plot_corr_heatmap(run_dir, out_path) -> None:
    """Two-point covariance over the sampled (x, y) pairs."""
    corr = read_table(Path(run_dir) / "corr.csv", "corr")
    x = corr["x"].astype(int)
    y = corr["y"].astype(int)
    n = int(max(x.max(), y.max())) + 1
    grid = np.full((n, n), np.nan)
    grid[y, x] = corr["cov"]
    grid[x, y] = corr["cov"]
    lim = max(1e-12, np.nanmax(np.abs(corr["cov"])))
    fig, ax = plt.subplots(figsize=(5.8, 5.0))
    im = ax.imshow(grid, origin="lower", cmap="RdBu_r", vmin=-lim, vmax=lim,
                   interpolation="nearest")
    fig.colorbar(im, ax=ax, label="cov")
    ax.set_xlabel("site x")
    ax.set_ylabel("site y")
    ax.set_title(f"two-point correlation ({run_label(corr.meta)})", fontsize=10)
    _finish(fig, out_path)


def plot_convergence(run_dirs, out_path) -> None:
    """Convergence-in-N curves from hydro summaries: sup bulk distance and
    the worst weak-statistic deviation per run directory."""
    rows = []
    for rd in run_dirs:
        summary = read_summary(rd)
        if summary.get("experiment") != "hydro" or not summary.get("results"):
            raise SchemaError(f"{rd}: not a hydro run summary")
        res = summary["results"][0]
        N = summary["config"]["params"]["N"]
        weak = max(w["diff"] for w in res["weak_statistics"].values())
        rows.append((N, res["sup_bulk_distance"], weak))
    if not rows:
        raise SchemaError("no run directories supplied")
    rows.sort()
    ns = [r[0] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    ax.loglog(ns, [r[1] for r in rows], "o-", label="sup bulk distance")
    ax.loglog(ns, [r[2] for r in rows], "s--", label="max weak-statistic gap")
    ax.set_xlabel("N")
    ax.set_ylabel("distance")
    ax.set_title("hydrodynamic convergence in N", fontsize=10)
    ax.grid(alpha=0.25, which="both", lw=0.4)
    ax.legend(fontsize=8)
    _finish(fig, out_path)


def plot_dual_stats(run_dir, out_path) -> None:
    """Histograms of the label count and lifespan of dual runs, plus the
    failure/survival tallies."""
    stats = read_table(Path(run_dir) / "dual_stats.csv", "dual_stats")
    fig, axes = plt.subplots(1, 3, figsize=(10.5, 3.6))
    kappa = stats["kappa"].astype(int)
    axes[0].hist(kappa, bins=np.arange(0.5, kappa.max() + 1.5), color="#1f77b4")
    axes[0].set_yscale("log")
    axes[0].set_xlabel("labels used")
    axes[0].set_ylabel("runs")
    life = stats["lifespan"]
    axes[1].hist(life, bins=60, color="#2ca02c")
    axes[1].set_yscale("log")
    axes[1].set_xlabel("lifespan")
    tallies = [stats["failed"].mean(), stats["hit_horizon"].mean()]
    axes[2].bar(["failed", "hit horizon"], tallies, color=["#d62728", "#7f7f7f"])
    axes[2].set_ylabel("fraction")
    fig.suptitle(f"dual-run statistics ({run_label(stats.meta)})", fontsize=10)
    fig.tight_layout()
    _finish(fig, out_path)
