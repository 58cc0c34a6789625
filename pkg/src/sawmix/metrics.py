"""Evaluation metrics over emitted run tables.

Everything here is a pure function of file contents: posterior tables,
ground-truth labels, truth states and state estimates. The same functions
back both the `eval` subcommand and the summary block of `run`.
"""

from __future__ import annotations

import numpy as np

from .fileio import read_csv

__all__ = [
    "DataError",
    "load_posteriors",
    "load_labels",
    "load_states",
    "argmax_labels",
    "transition_mask",
    "argmax_accuracy",
    "danger_passes",
    "position_rmse",
    "evaluate_posteriors",
]

DANGER = "danger"
TIE_TOL = 1e-12
DETECTION_THRESHOLD = 0.5


class DataError(ValueError):
    """Run/evaluation input files are missing, malformed or misaligned."""


def load_posteriors(path) -> tuple[list[str], np.ndarray]:
    """Read a posterior CSV `k,<labels...>` into (labels, probs[steps, m])."""
    header, rows = read_csv(path)
    if len(header) < 3 or header[0] != "k":
        raise DataError(f"{path}: expected header 'k,<label>,...'")
    labels = header[1:]
    try:
        probs = np.array([[float(v) for v in row[1:]] for row in rows])
    except ValueError:
        raise DataError(f"{path}: non-numeric probability entry") from None
    if probs.size and np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-9):
        raise DataError(f"{path}: probability rows do not sum to 1")
    return labels, probs


def load_labels(path) -> list[str]:
    header, rows = read_csv(path)
    if header[:2] != ["k", "label"]:
        raise DataError(f"{path}: expected header 'k,label'")
    return [row[1] for row in rows]


def load_states(path) -> np.ndarray:
    """Read a `k,x,vx,y,vy` table into (steps, 4) states."""
    header, rows = read_csv(path)
    if header != ["k", "x", "vx", "y", "vy"]:
        raise DataError(f"{path}: expected header 'k,x,vx,y,vy'")
    return np.array([[float(v) for v in row[1:]] for row in rows])


def argmax_labels(labels: list[str], probs: np.ndarray) -> list[str]:
    """Most probable label per row; ties break to the lowest label index."""
    return [labels[int(np.argmax(row))] for row in probs]


def transition_mask(truth_labels: list[str], margin: int) -> np.ndarray:
    """True where a row is at least ``margin`` steps away from a label change."""
    n = len(truth_labels)
    keep = np.ones(n, dtype=bool)
    for i in range(1, n):
        if truth_labels[i] != truth_labels[i - 1]:
            keep[max(0, i - margin):min(n, i + margin)] = False
    return keep


def argmax_accuracy(labels: list[str], probs: np.ndarray, truth_labels: list[str],
                    margin: int = 2) -> float:
    if probs.shape[0] != len(truth_labels):
        raise DataError("posterior and label tables have different lengths")
    predicted = argmax_labels(labels, probs)
    keep = transition_mask(truth_labels, margin)
    kept = int(keep.sum())
    if kept == 0:
        return float("nan")
    hits = sum(1 for i in np.flatnonzero(keep) if predicted[i] == truth_labels[i])
    return hits / kept


def danger_passes(truth_labels: list[str]) -> list[tuple[int, int]]:
    """Contiguous [entry, exit] index ranges labeled danger."""
    passes = []
    start = None
    for i, lab in enumerate(truth_labels):
        if lab == DANGER and start is None:
            start = i
        elif lab != DANGER and start is not None:
            passes.append((start, i - 1))
            start = None
    if start is not None:
        passes.append((start, len(truth_labels) - 1))
    return passes


def position_rmse(estimates: np.ndarray, truth: np.ndarray) -> float:
    if estimates.shape != truth.shape:
        raise DataError("estimate and truth tables have different shapes")
    err = estimates[:, [0, 2]] - truth[:, [0, 2]]
    return float(np.sqrt(np.mean(np.sum(err ** 2, axis=1))))


def evaluate_posteriors(labels: list[str], probs: np.ndarray, truth_labels: list[str],
                        margin: int = 2) -> dict:
    """Accuracy, per-pass danger peaks and detection lags for one engine."""
    if probs.shape[0] != len(truth_labels):
        raise DataError("posterior and label tables have different lengths")
    if DANGER not in labels:
        raise DataError(f"posterior table has no '{DANGER}' column")
    danger_col = probs[:, labels.index(DANGER)]

    passes = []
    for entry, exit_ in danger_passes(truth_labels):
        window = danger_col[entry:exit_ + 1]
        above = np.flatnonzero(window > DETECTION_THRESHOLD)
        passes.append({
            "entry": entry,
            "exit": exit_,
            "max_danger": float(window.max()),
            "detection_lag": int(above[0]) if above.size else None,
        })

    # near-uniform rows signal a run that never saw usable evidence
    tied = np.abs(probs.max(axis=1) - probs.min(axis=1)) < TIE_TOL
    return {
        "accuracy": argmax_accuracy(labels, probs, truth_labels, margin),
        "transition_margin": margin,
        "danger_passes": passes,
        "degenerate": bool(np.mean(tied) > 0.5),
        "rows": int(probs.shape[0]),
    }
