import numpy as np
import pytest

from sawmix import pipeline
from sawmix.config import ConfigError, default_config_path, load_config

KNOWLEDGE_BLOCK = """\
  knowledge:
    safe:
      - {weight: 0.5, mean: [-1000.0, 2000.0], diagonal: [250000.0, 250000.0]}
      - {weight: 0.5, mean: [1000.0, 2000.0], diagonal: [250000.0, 250000.0]}
    potential danger:
      - {weight: 1.0, mean: [0.0, 1500.0], covariance: [100000.0, 0.0, 0.0, 100000.0]}
    danger:
      - weight: 1.0
        mean: [0.0, 1500.0]
        covariance:
          - [10000.0, 0.0]
          - [0.0, 10000.0]
"""


def test_default_config_loads_and_builds():
    cfg = load_config(default_config_path())
    assert cfg.model.knowledge_mixtures is None
    km = pipeline.build_scenario_knowledge(cfg)
    assert km.space.labels == cfg.model.labels
    assert len(km.mixture_for("danger").components) == 3


def test_explicit_knowledge_mixtures(mini_config_path, tmp_path):
    text = mini_config_path.read_text() + KNOWLEDGE_BLOCK
    path = tmp_path / "explicit.yaml"
    path.write_text(text)
    cfg = load_config(path)
    km = pipeline.build_scenario_knowledge(cfg)

    safe = km.mixture_for("safe")
    assert len(safe.components) == 2
    assert np.allclose(safe.weights, 0.5)
    # diagonal and row-major covariance entries produce the same structure
    danger = km.mixture_for("danger")
    assert np.array_equal(danger.components[0].covariance,
                          np.diag([10_000.0, 10_000.0]))
    potential = km.mixture_for("potential danger")
    assert np.array_equal(potential.components[0].covariance,
                          np.diag([100_000.0, 100_000.0]))


def test_explicit_knowledge_runs_end_to_end(mini_config_path, tmp_path):
    text = mini_config_path.read_text() + KNOWLEDGE_BLOCK
    path = tmp_path / "explicit.yaml"
    path.write_text(text)
    cfg = load_config(path)
    data = tmp_path / "data"
    pipeline.simulate(cfg, data)
    summary = pipeline.run(cfg, data, tmp_path / "run", engine="essm")
    assert summary["replicates"] == 1
    assert (tmp_path / "run" / "essm_posteriors.csv").exists()


def test_knowledge_missing_label_rejected(mini_config_path, tmp_path):
    block = """\
  knowledge:
    safe:
      - {weight: 1.0, mean: [0.0, 0.0], diagonal: [1.0, 1.0]}
"""
    path = tmp_path / "missing.yaml"
    path.write_text(mini_config_path.read_text() + block)
    with pytest.raises(ConfigError, match="missing mixtures"):
        load_config(path)


def test_knowledge_bad_weight_sum_rejected(mini_config_path, tmp_path):
    block = KNOWLEDGE_BLOCK.replace("weight: 0.5", "weight: 0.3", 1)
    path = tmp_path / "badweights.yaml"
    path.write_text(mini_config_path.read_text() + block)
    with pytest.raises(ConfigError, match="safe"):
        load_config(path)


def test_knowledge_requires_some_covariance(mini_config_path, tmp_path):
    block = """\
  knowledge:
    safe:
      - {weight: 1.0, mean: [0.0, 0.0]}
    potential danger:
      - {weight: 1.0, mean: [0.0, 0.0], diagonal: [1.0, 1.0]}
    danger:
      - {weight: 1.0, mean: [0.0, 0.0], diagonal: [1.0, 1.0]}
"""
    path = tmp_path / "nocov.yaml"
    path.write_text(mini_config_path.read_text() + block)
    with pytest.raises(ConfigError, match="covariance"):
        load_config(path)


def test_knowledge_conflicting_covariances_rejected(mini_config_path, tmp_path):
    block = KNOWLEDGE_BLOCK.replace(
        "mean: [0.0, 1500.0], covariance:",
        "mean: [0.0, 1500.0], diagonal: [1.0, 1.0], covariance:", 1)
    path = tmp_path / "conflict.yaml"
    path.write_text(mini_config_path.read_text() + block)
    with pytest.raises(ConfigError, match="either"):
        load_config(path)
