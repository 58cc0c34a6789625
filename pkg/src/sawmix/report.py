"""Render figures from emitted run tables.

Reads only the delimited outputs (posteriors, estimates, diagnostics plus
the simulated truth), so figures can be regenerated at any time without
rerunning an engine. PNG files land next to the tables they depict.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from . import metrics
from .config import RunConfig
from .fileio import read_csv

__all__ = ["render_run_figures"]


def _plot_posteriors(ax, labels, probs, title):
    for j, label in enumerate(labels):
        ax.plot(np.arange(probs.shape[0]), probs[:, j], label=label, linewidth=1.2)
    ax.set_xlabel("step")
    ax.set_ylabel("posterior probability")
    ax.set_ylim(-0.02, 1.02)
    ax.set_title(title)
    ax.legend(loc="center right", fontsize=8)


def render_run_figures(run_dir, data_dir=None, cfg: RunConfig | None = None,
                       out_dir=None) -> list[Path]:
    """Write PNG figures for whatever tables exist in ``run_dir``."""
    run_dir = Path(run_dir)
    out = Path(out_dir) if out_dir is not None else run_dir
    out.mkdir(parents=True, exist_ok=True)
    written = []

    for engine in ("hmm", "essm"):
        post_path = run_dir / f"{engine}_posteriors.csv"
        if not post_path.exists():
            continue
        labels, probs = metrics.load_posteriors(post_path)
        fig, ax = plt.subplots(figsize=(8, 4))
        _plot_posteriors(ax, labels, probs, f"{engine} situation posterior")
        fig.tight_layout()
        target = out / f"{engine}_posteriors.png"
        fig.savefig(target, dpi=150)
        plt.close(fig)
        written.append(target)

    est_path = run_dir / "essm_estimate.csv"
    if est_path.exists():
        fig, ax = plt.subplots(figsize=(7, 7))
        est = metrics.load_states(est_path)
        if data_dir is not None and (Path(data_dir) / "truth.csv").exists():
            truth = metrics.load_states(Path(data_dir) / "truth.csv")
            ax.plot(truth[:, 0], truth[:, 2], "k-", linewidth=1.0, label="truth")
        ax.plot(est[:, 0], est[:, 2], "r--", linewidth=1.0, label="estimate")
        if cfg is not None:
            for reg in cfg.scenario.regions.regions:
                ax.add_patch(plt.Circle(reg.center, reg.radius, fill=False,
                                        color="tab:red", linewidth=1.0))
                ax.add_patch(plt.Circle(reg.center, cfg.scenario.regions.kappa * reg.radius,
                                        fill=False, color="tab:orange",
                                        linestyle=":", linewidth=0.8))
            ax.plot(*cfg.scenario.sensor.position, "b^", markersize=8, label="sensor")
        ax.set_xlabel("x [m]")
        ax.set_ylabel("y [m]")
        ax.set_aspect("equal")
        ax.set_title("estimated track")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        target = out / "track.png"
        fig.savefig(target, dpi=150)
        plt.close(fig)
        written.append(target)

    diag_path = run_dir / "essm_diagnostics.csv"
    if diag_path.exists():
        header, rows = read_csv(diag_path)
        ks = np.array([int(r[0]) for r in rows])
        ess = np.array([float(r[1]) for r in rows])
        resampled = np.array([r[2] == "1" for r in rows])
        fig, ax = plt.subplots(figsize=(8, 3))
        ax.plot(ks, ess, linewidth=1.0, label="ESS")
        if resampled.any():
            ax.plot(ks[resampled], ess[resampled], ".", markersize=2.5,
                    color="tab:red", label="resampled")
        ax.set_xlabel("step")
        ax.set_ylabel("effective sample size")
        ax.legend(loc="best", fontsize=8)
        fig.tight_layout()
        target = out / "essm_diagnostics.png"
        fig.savefig(target, dpi=150)
        plt.close(fig)
        written.append(target)

    return written
