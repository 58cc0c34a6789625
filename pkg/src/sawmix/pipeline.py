"""Experiment orchestration: simulate, run the engines, evaluate.

File layout produced:

  data dir (simulate):  truth.csv, measurements.csv, labels.csv, manifest.json
  run dir  (run):       [rep-NNNN/] hmm_posteriors.csv, essm_posteriors.csv,
                        essm_estimate.csv, essm_diagnostics.csv, summary.json

All randomness flows through substreams of one master seed; rerunning with
the same config and seed reproduces every output file byte for byte.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import metrics
from .config import RunConfig
from .essm import EssmFilter, MeasurementInit, pf_init
from .fileio import read_csv, write_csv, write_json
from .hmm import HmmFilter
from .knowledge import KnowledgeModel, SituationDistribution, SituationSpace
from .metrics import DataError
from .scenario import Observation, build_knowledge, build_labels, generate_truth, observe
from .streams import substream

__all__ = [
    "DegeneracyError",
    "build_scenario_knowledge",
    "simulate",
    "load_measurements",
    "run_hmm_engine",
    "run_essm_engine",
    "run",
    "evaluate",
]

TRUTH_FILE = "truth.csv"
MEASUREMENT_FILE = "measurements.csv"
LABELS_FILE = "labels.csv"
STATE_HEADER = ["k", "x", "vx", "y", "vy"]


class DegeneracyError(RuntimeError):
    """An engine exceeded the configured tolerance of degenerate steps."""


def _child_seed(master: int, *path) -> int:
    """Stable 63-bit child seed for an engine or replicate."""
    return int(substream(master, *path).integers(2 ** 63))


def build_scenario_knowledge(cfg: RunConfig) -> KnowledgeModel:
    """Knowledge model from the config: explicit mixtures when given,
    otherwise constructed from the region geometry."""
    if cfg.model.knowledge_mixtures is not None:
        return KnowledgeModel(space=SituationSpace(cfg.model.labels),
                              mixtures=cfg.model.knowledge_mixtures,
                              state_dim=4, projection=cfg.model.projection)
    sc = cfg.scenario
    return build_knowledge(sc.regions, sc.area, safe_grid=sc.safe_grid,
                           safe_std_factor=sc.safe_std_factor, labels=cfg.model.labels)


def simulate(cfg: RunConfig, out_dir, seed: int | None = None,
             no_noise: bool = False) -> dict:
    """Generate truth, measurements and labels files; returns the manifest."""
    sc = cfg.scenario
    master = cfg.seed if seed is None else int(seed)
    out = Path(out_dir)

    noise_on = sc.process_noise_on and not no_noise
    truth_rng = substream(master, "truth") if noise_on else None
    truth = generate_truth(sc.waypoints, sc.steps, sc.motion, truth_rng)

    sensor_rng = None if no_noise else substream(master, "sensor")
    observations = [observe(sc.sensor, truth[k], sensor_rng, k=k) for k in range(sc.steps)]
    labels = build_labels(sc.regions, truth)

    write_csv(out / TRUTH_FILE, STATE_HEADER,
              ([k, *truth[k]] for k in range(sc.steps)))
    write_csv(out / MEASUREMENT_FILE, ["k", "bearing_deg", "range_m"],
              ([y.k, np.rad2deg(y.bearing), y.range] for y in observations))
    write_csv(out / LABELS_FILE, ["k", "label"], enumerate(labels))

    manifest = {
        "config": cfg.source,
        "master_seed": master,
        "streams": {"truth": f"{master}/truth", "sensor": f"{master}/sensor"},
        "steps": sc.steps,
        "no_noise": bool(no_noise),
    }
    write_json(out / "manifest.json", manifest)
    return manifest


def load_measurements(data_dir) -> list[Observation]:
    path = Path(data_dir) / MEASUREMENT_FILE
    try:
        header, rows = read_csv(path)
    except OSError as exc:
        raise DataError(f"cannot read measurements: {exc}") from None
    if header != ["k", "bearing_deg", "range_m"]:
        raise DataError(f"{path}: expected header 'k,bearing_deg,range_m'")
    return [Observation(k=int(r[0]), bearing=np.deg2rad(float(r[1])), range=float(r[2]))
            for r in rows]


def run_hmm_engine(cfg: RunConfig, km: KnowledgeModel, observations, seed: int):
    """Posterior per step; row 0 is the configured initial distribution."""
    model = cfg.model
    space = km.space
    initial = (SituationDistribution.uniform(len(space)) if model.initial_situation is None
               else SituationDistribution(model.initial_situation))
    filt = HmmFilter(space=space, transition=model.transition, km=km,
                     mc_samples=model.n_mc, seed=seed, posterior=initial)
    posteriors = np.empty((len(observations), len(space)))
    posteriors[0] = initial.probs
    for y in observations[1:]:
        posteriors[y.k] = filt.step(y, cfg.scenario.sensor).probs
    return posteriors, filt.degenerate_steps


def run_essm_engine(cfg: RunConfig, km: KnowledgeModel, observations, seed: int):
    """Situation posteriors, state estimates and diagnostics per step."""
    model = cfg.model
    rng = substream(seed, "essm")
    init = MeasurementInit(sensor=cfg.scenario.sensor, observation=observations[0],
                           velocity_std=model.init_velocity_std, widen=model.init_widen)
    particles = pf_init(init, model.n_particles, rng)
    filt = EssmFilter(particles=particles, motion=cfg.scenario.motion,
                      sensor=cfg.scenario.sensor, km=km,
                      ess_threshold=model.ess_threshold)

    steps = len(observations)
    m = len(km.space)
    posteriors = np.empty((steps, m))
    estimates = np.empty((steps, 4))
    diag_rows = []
    degenerate_steps = []

    post = filt.situation_posterior()
    posteriors[0] = post.probs
    estimates[0] = filt.estimate()
    diag_rows.append([0, float(len(particles)), 0, ""])
    if post.degenerate:
        degenerate_steps.append(0)

    for y in observations[1:]:
        filt.step(y, rng)
        post = filt.situation_posterior()
        posteriors[y.k] = post.probs
        estimates[y.k] = filt.estimate()
        d = filt.diagnostics[-1]
        flags = []
        if d.diverged:
            flags.append("divergence")
        if post.degenerate:
            flags.append("underflow")
            degenerate_steps.append(y.k)
        diag_rows.append([y.k, d.ess, int(d.resampled), ";".join(flags)])
        if d.diverged:
            degenerate_steps.append(y.k)
    return posteriors, estimates, diag_rows, sorted(set(degenerate_steps))


def _write_posteriors(path, labels, posteriors):
    write_csv(path, ["k", *labels],
              ([k, *posteriors[k]] for k in range(posteriors.shape[0])))


def _replicate_metrics(rep_dir, engines, labels_path, truth_path, margin):
    out = {}
    truth_labels = metrics.load_labels(labels_path)
    for engine in engines:
        labels, probs = metrics.load_posteriors(rep_dir / f"{engine}_posteriors.csv")
        out[engine] = metrics.evaluate_posteriors(labels, probs, truth_labels, margin)
        if engine == "essm":
            estimates = metrics.load_states(rep_dir / "essm_estimate.csv")
            truth = metrics.load_states(truth_path)
            out[engine]["rmse_position"] = metrics.position_rmse(estimates, truth)
    return out


def run(cfg: RunConfig, data_dir, out_dir, engine: str = "both",
        replicates: int = 1, seed: int | None = None) -> dict:
    """Run the selected engines over a simulated data set.

    With one replicate the tables land directly in ``out_dir``; with more,
    each replicate gets a rep-NNNN subdirectory and the summary aggregates
    the per-replicate metrics. Raises DegeneracyError after writing all
    outputs if an engine's flagged-step fraction exceeds the configured
    tolerance.
    """
    if engine not in ("hmm", "essm", "both"):
        raise ValueError(f"unknown engine '{engine}'")
    engines = ["hmm", "essm"] if engine == "both" else [engine]
    if replicates < 1:
        raise ValueError("replicate count must be positive")

    data = Path(data_dir)
    out = Path(out_dir)
    master = cfg.seed if seed is None else int(seed)
    observations = load_measurements(data)
    if len(observations) != cfg.scenario.steps:
        raise DataError(
            f"measurement rows ({len(observations)}) do not match config steps "
            f"({cfg.scenario.steps})")
    km = build_scenario_knowledge(cfg)

    labels_path = data / LABELS_FILE
    truth_path = data / TRUTH_FILE
    rep_reports = []
    degenerate_engines = []

    for rep in range(replicates):
        rep_dir = out if replicates == 1 else out / f"rep-{rep:04d}"
        rep_dir.mkdir(parents=True, exist_ok=True)
        rep_seeds = {}
        rep_degenerate = {}

        for eng in engines:
            eng_seed = _child_seed(master, eng, rep)
            rep_seeds[eng] = eng_seed
            if eng == "hmm":
                posteriors, degenerate = run_hmm_engine(cfg, km, observations, eng_seed)
                _write_posteriors(rep_dir / "hmm_posteriors.csv", km.space.labels, posteriors)
            else:
                posteriors, estimates, diag_rows, degenerate = run_essm_engine(
                    cfg, km, observations, eng_seed)
                _write_posteriors(rep_dir / "essm_posteriors.csv", km.space.labels, posteriors)
                write_csv(rep_dir / "essm_estimate.csv", STATE_HEADER,
                          ([k, *estimates[k]] for k in range(estimates.shape[0])))
                write_csv(rep_dir / "essm_diagnostics.csv",
                          ["k", "ess", "resampled", "flags"], diag_rows)
            rep_degenerate[eng] = degenerate

        rep_metrics = _replicate_metrics(rep_dir, engines, labels_path, truth_path,
                                         cfg.model.transition_margin)
        for eng in engines:
            frac = len(rep_degenerate[eng]) / len(observations)
            rep_metrics[eng]["degenerate_steps"] = len(rep_degenerate[eng])
            rep_metrics[eng]["degenerate_fraction"] = frac
            if frac > cfg.model.degeneracy_tolerance:
                degenerate_engines.append((rep, eng, frac))
        rep_reports.append({"replicate": rep, "seeds": rep_seeds, "metrics": rep_metrics})

    summary = {
        "master_seed": master,
        "engines": engines,
        "replicates": len(rep_reports),
        "seed_derivation": "substream(master_seed, engine, replicate_index)",
        "runs": rep_reports,
    }
    if replicates > 1:
        agg = {}
        for eng in engines:
            acc = [r["metrics"][eng]["accuracy"] for r in rep_reports]
            agg[eng] = {"accuracy_mean": float(np.mean(acc)),
                        "accuracy_std": float(np.std(acc))}
            if eng == "essm":
                rmse = [r["metrics"][eng]["rmse_position"] for r in rep_reports]
                agg[eng]["rmse_mean"] = float(np.mean(rmse))
                agg[eng]["rmse_std"] = float(np.std(rmse))
        summary["aggregate"] = agg
    write_json(out / "summary.json", summary)

    if degenerate_engines:
        rep, eng, frac = degenerate_engines[0]
        raise DegeneracyError(
            f"{eng} replicate {rep}: {frac:.1%} degenerate steps exceed the "
            f"configured tolerance {cfg.model.degeneracy_tolerance:.1%}")
    return summary


def evaluate(run_dir, labels_path, truth_path=None, margin: int = 2) -> dict:
    """Metrics JSON payload for one run directory, purely from its files."""
    run_dir = Path(run_dir)
    labels_path = Path(labels_path)
    if truth_path is None:
        truth_path = labels_path.parent / TRUTH_FILE
    truth_labels = metrics.load_labels(labels_path)

    report = {}
    for engine in ("hmm", "essm"):
        post_path = run_dir / f"{engine}_posteriors.csv"
        if not post_path.exists():
            continue
        labels, probs = metrics.load_posteriors(post_path)
        report[engine] = metrics.evaluate_posteriors(labels, probs, truth_labels, margin)
        est_path = run_dir / "essm_estimate.csv"
        if engine == "essm" and est_path.exists() and Path(truth_path).exists():
            estimates = metrics.load_states(est_path)
            truth = metrics.load_states(truth_path)
            report[engine]["rmse_position"] = metrics.position_rmse(estimates, truth)
    if not report:
        raise DataError(f"no posterior tables found in {run_dir}")
    return report
