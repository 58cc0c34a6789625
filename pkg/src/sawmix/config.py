"""Run configuration: one YAML file describing the scenario and the engines.

Parse errors keep the YAML line information; semantic errors name the key
path that failed, so a bad config is diagnosable without reading code.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .essm import DEFAULT_ESS_FRACTION, DEFAULT_PARTICLES
from .hmm import DEFAULT_MC_SAMPLES, TransitionMatrix
from .knowledge import GaussianComponent, GaussianMixture
from .scenario import DEFAULT_LABELS, MotionModel, Region, RegionSet, SensorModel

__all__ = ["ConfigError", "ScenarioSpec", "ModelSpec", "RunConfig", "load_config",
           "default_config_path"]


class ConfigError(ValueError):
    """Invalid or unreadable run configuration."""


def default_config_path() -> Path:
    """Path of the bundled default scenario file."""
    return Path(__file__).parent / "data" / "default_scenario.yaml"


def _get(mapping, key, path, required=True, default=None):
    if key in mapping:
        return mapping[key]
    if required:
        raise ConfigError(f"missing config key '{path}.{key}'")
    return default


def _floats(value, path, length=None):
    try:
        arr = [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError(f"'{path}' must be a list of numbers") from None
    if length is not None and len(arr) != length:
        raise ConfigError(f"'{path}' must have length {length}")
    return arr


@dataclass(frozen=True)
class ScenarioSpec:
    area: tuple
    regions: RegionSet
    waypoints: tuple
    steps: int
    motion: MotionModel
    sensor: SensorModel
    process_noise_on: bool
    safe_grid: tuple[int, int]
    safe_std_factor: float


@dataclass(frozen=True)
class ModelSpec:
    labels: tuple[str, ...]
    transition: TransitionMatrix
    n_mc: int
    n_particles: int
    ess_threshold: float
    init_kind: str
    init_velocity_std: float
    init_widen: float
    initial_situation: np.ndarray | None
    degeneracy_tolerance: float
    transition_margin: int
    # explicit per-label mixtures; None means build them from the regions
    knowledge_mixtures: tuple[GaussianMixture, ...] | None = None
    projection: tuple[int, ...] = (0, 2)


@dataclass(frozen=True)
class RunConfig:
    seed: int
    scenario: ScenarioSpec
    model: ModelSpec
    source: str = "<memory>"


def _parse_scenario(raw, path="scenario") -> ScenarioSpec:
    area_raw = _get(raw, "area", path)
    xa = _floats(_get(area_raw, "x", f"{path}.area"), f"{path}.area.x", 2)
    ya = _floats(_get(area_raw, "y", f"{path}.area"), f"{path}.area.y", 2)
    area = ((xa[0], xa[1]), (ya[0], ya[1]))

    regions = []
    for i, reg in enumerate(_get(raw, "regions", path)):
        rp = f"{path}.regions[{i}]"
        center = _floats(_get(reg, "center", rp), f"{rp}.center", 2)
        radius = float(_get(reg, "radius", rp))
        regions.append(Region(center, radius))
    kappa = float(_get(raw, "kappa", path, required=False, default=float(np.sqrt(10.0))))
    try:
        region_set = RegionSet(tuple(regions), kappa=kappa)
    except ValueError as exc:
        raise ConfigError(f"'{path}.regions': {exc}") from None

    steps = int(_get(raw, "steps", path))
    if steps < 2:
        raise ConfigError(f"'{path}.steps' must be at least 2")
    waypoints = []
    for i, wp in enumerate(_get(raw, "waypoints", path)):
        wpth = f"{path}.waypoints[{i}]"
        pos = _floats(_get(wp, "pos", wpth), f"{wpth}.pos", 2)
        waypoints.append((tuple(pos), int(_get(wp, "step", wpth))))
    ks = [k for _, k in waypoints]
    if len(waypoints) < 2 or ks[0] != 0 or ks[-1] != steps - 1 \
            or any(b <= a for a, b in zip(ks, ks[1:])):
        raise ConfigError(
            f"'{path}.waypoints' steps must increase from 0 to steps-1 ({steps - 1})")

    try:
        motion = MotionModel(
            T=float(_get(raw, "T", path, required=False, default=1.0)),
            intensity=float(_get(raw, "process_noise_intensity", path,
                                 required=False, default=10.0)),
            paper_literal_B=bool(_get(raw, "paper_literal_B", path,
                                      required=False, default=False)),
        )
    except ValueError as exc:
        raise ConfigError(f"'{path}': {exc}") from None

    sensor_raw = _get(raw, "sensor", path)
    sp = f"{path}.sensor"
    try:
        sensor = SensorModel(
            position=_floats(_get(sensor_raw, "position", sp, required=False,
                                  default=[0.0, 0.0]), f"{sp}.position", 2),
            bearing_std=np.deg2rad(float(_get(sensor_raw, "bearing_std_deg", sp,
                                              required=False, default=0.1))),
            range_std=float(_get(sensor_raw, "range_std_m", sp, required=False,
                                 default=50.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"'{sp}': {exc}") from None

    grid_raw = _get(raw, "safe_grid", path, required=False, default={})
    safe_grid = (int(grid_raw.get("nx", 10)), int(grid_raw.get("ny", 10)))
    safe_std_factor = float(grid_raw.get("std_factor", 0.4))

    return ScenarioSpec(
        area=area, regions=region_set, waypoints=tuple(waypoints), steps=steps,
        motion=motion, sensor=sensor,
        process_noise_on=bool(_get(raw, "process_noise_on", path, required=False,
                                   default=True)),
        safe_grid=safe_grid, safe_std_factor=safe_std_factor,
    )


def _parse_component(raw, dim, path) -> GaussianComponent:
    weight = float(_get(raw, "weight", path))
    mean = _floats(_get(raw, "mean", path), f"{path}.mean", dim)
    if "diagonal" in raw and "covariance" in raw:
        raise ConfigError(f"'{path}' must give either 'covariance' or 'diagonal'")
    if "diagonal" in raw:
        cov = np.diag(_floats(raw["diagonal"], f"{path}.diagonal", dim))
    elif "covariance" in raw:
        flat = raw["covariance"]
        if flat and isinstance(flat[0], (list, tuple)):
            flat = [v for row in flat for v in row]
        cov = np.array(_floats(flat, f"{path}.covariance", dim * dim)).reshape(dim, dim)
    else:
        raise ConfigError(f"'{path}' needs a 'covariance' (row-major) or 'diagonal' entry")
    try:
        return GaussianComponent(weight, mean, cov)
    except ValueError as exc:
        raise ConfigError(f"'{path}': {exc}") from None


def _parse_knowledge(raw, labels, projection, path="model.knowledge"):
    missing = [l for l in labels if l not in raw]
    if missing:
        raise ConfigError(f"'{path}' is missing mixtures for labels {missing}")
    dim = len(projection)
    mixtures = []
    for label in labels:
        comps = raw[label]
        if not isinstance(comps, list) or not comps:
            raise ConfigError(f"'{path}.{label}' must be a non-empty component list")
        parsed = [_parse_component(c, dim, f"{path}.{label}[{i}]")
                  for i, c in enumerate(comps)]
        try:
            mixtures.append(GaussianMixture(parsed))
        except ValueError as exc:
            raise ConfigError(f"'{path}.{label}': {exc}") from None
    return tuple(mixtures)


def _parse_model(raw, m_labels, path="model") -> ModelSpec:
    labels = tuple(_get(raw, "labels", path, required=False, default=list(m_labels)))
    try:
        transition = TransitionMatrix(np.array(_get(raw, "transition", path), dtype=float))
    except ValueError as exc:
        raise ConfigError(f"'{path}.transition': {exc}") from None
    if transition.m != len(labels):
        raise ConfigError(f"'{path}.transition' size does not match the label count")

    n_mc = int(_get(raw, "n_mc", path, required=False, default=DEFAULT_MC_SAMPLES))
    n_particles = int(_get(raw, "n_particles", path, required=False,
                           default=DEFAULT_PARTICLES))
    ess_threshold = float(_get(raw, "ess_threshold", path, required=False,
                               default=DEFAULT_ESS_FRACTION))
    if n_mc < 1 or n_particles < 1 or not (0.0 <= ess_threshold <= 1.0):
        raise ConfigError(f"'{path}' engine parameters out of range")

    init_raw = _get(raw, "init", path, required=False, default={})
    init_kind = str(init_raw.get("kind", "measurement"))
    if init_kind not in ("measurement",):
        raise ConfigError(f"'{path}.init.kind' must be 'measurement'")

    initial = _get(raw, "initial_situation", path, required=False, default="uniform")
    if isinstance(initial, str):
        if initial != "uniform":
            raise ConfigError(f"'{path}.initial_situation' must be 'uniform' or a list")
        initial_arr = None
    else:
        initial_arr = np.array(_floats(initial, f"{path}.initial_situation", len(labels)))
        total = initial_arr.sum()
        if abs(total - 1.0) > 1e-9 or np.any(initial_arr < 0.0):
            raise ConfigError(f"'{path}.initial_situation' must be a probability vector")
        initial_arr = initial_arr / total

    projection = tuple(int(i) for i in _get(raw, "projection", path, required=False,
                                            default=[0, 2]))
    knowledge_raw = _get(raw, "knowledge", path, required=False, default=None)
    knowledge = (None if knowledge_raw is None
                 else _parse_knowledge(knowledge_raw, labels, projection))

    return ModelSpec(
        labels=labels, transition=transition, n_mc=n_mc, n_particles=n_particles,
        ess_threshold=ess_threshold, init_kind=init_kind,
        init_velocity_std=float(init_raw.get("velocity_std", 10.0)),
        init_widen=float(init_raw.get("widen", 2.0)),
        initial_situation=initial_arr,
        degeneracy_tolerance=float(_get(raw, "degeneracy_tolerance", path,
                                        required=False, default=1.0)),
        transition_margin=int(_get(raw, "transition_margin", path,
                                   required=False, default=2)),
        knowledge_mixtures=knowledge,
        projection=projection,
    )


def load_config(path) -> RunConfig:
    """Load and validate a run configuration from a YAML file."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from None
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"invalid YAML in {path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"config root in {path} must be a mapping")

    seed = int(_get(raw, "seed", "", required=False, default=0))
    scenario = _parse_scenario(_get(raw, "scenario", "<root>"))
    model = _parse_model(_get(raw, "model", "<root>"), DEFAULT_LABELS)
    return RunConfig(seed=seed, scenario=scenario, model=model, source=str(path))
