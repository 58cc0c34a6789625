"""Threat-surveillance world: target kinematics, bearing-range sensing, regions.

State vectors are ordered [x, vx, y, vy] (meters, meters per sampling
period). Bearings are radians internally, measured from the +x axis and
wrapped to (-pi, pi]; degrees appear only at config and CSV boundaries.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .knowledge import GaussianComponent, GaussianMixture, KnowledgeModel, SituationSpace

__all__ = [
    "STATE_DIM",
    "POSITION_IDX",
    "DegenerateGeometryWarning",
    "MotionModel",
    "SensorModel",
    "Observation",
    "Region",
    "RegionSet",
    "wrap_angle",
    "motion_step",
    "observe",
    "observation_likelihood",
    "generate_truth",
    "build_knowledge",
    "build_labels",
]

STATE_DIM = 4
POSITION_IDX = (0, 2)

SAFE, POTENTIAL_DANGER, DANGER = "safe", "potential danger", "danger"
DEFAULT_LABELS = (SAFE, POTENTIAL_DANGER, DANGER)


class DegenerateGeometryWarning(UserWarning):
    """Raised when a target coincides with the sensor and the bearing is undefined."""


def wrap_angle(theta):
    """Wrap angles to (-pi, pi]; works on scalars and arrays."""
    return np.pi - (np.pi - np.asarray(theta)) % (2.0 * np.pi)


@dataclass(frozen=True)
class MotionModel:
    """Near-constant-velocity kinematics with white-acceleration process noise.

    The transition matrix is block diagonal with [[1, T], [0, 1]] per axis.
    Process noise has covariance Q = B diag(q, q) B^T. The standard gain
    puts T^2/2 on the position rows and T on the velocity rows; set
    ``paper_literal_B`` to use the transposed pairing instead (T on position
    rows), which some sources print for the same model.
    """

    T: float = 1.0
    intensity: float = 10.0
    paper_literal_B: bool = False
    F: np.ndarray = field(init=False, repr=False)
    B: np.ndarray = field(init=False, repr=False)
    Q: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        T = float(self.T)
        if T <= 0:
            raise ValueError("sampling period must be positive")
        fs = np.array([[1.0, T], [0.0, 1.0]])
        F = np.zeros((4, 4))
        F[:2, :2] = fs
        F[2:, 2:] = fs
        if self.paper_literal_B:
            B = np.array([[T, 0.0], [0.0, T], [T * T / 2.0, 0.0], [0.0, T * T / 2.0]])
        else:
            B = np.array([[T * T / 2.0, 0.0], [T, 0.0], [0.0, T * T / 2.0], [0.0, T]])
        Q = B @ np.diag([self.intensity, self.intensity]) @ B.T
        object.__setattr__(self, "F", F)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "Q", Q)

    def step_batch(self, states: np.ndarray, rng: np.random.Generator | None) -> np.ndarray:
        """Propagate (n, 4) states one period, with process noise if rng given."""
        states = np.atleast_2d(np.asarray(states, dtype=float))
        out = states @ self.F.T
        if rng is not None:
            z = rng.standard_normal((states.shape[0], 2)) * np.sqrt(self.intensity)
            out = out + z @ self.B.T
        return out


def motion_step(model: MotionModel, state: np.ndarray,
                rng: np.random.Generator | None = None) -> np.ndarray:
    """One kinematic step of a single state; deterministic when rng is None."""
    state = np.asarray(state, dtype=float)
    if state.shape != (STATE_DIM,):
        raise ValueError(f"expected a state vector of length {STATE_DIM}")
    return model.step_batch(state[None, :], rng)[0]


@dataclass(frozen=True)
class Observation:
    """Bearing/range measurement at time index k; bearing wrapped to (-pi, pi]."""

    k: int
    bearing: float
    range: float

    def __post_init__(self):
        if not (self.range > 0.0):
            raise ValueError("observation range must be positive")
        object.__setattr__(self, "bearing", float(wrap_angle(self.bearing)))


@dataclass(frozen=True)
class SensorModel:
    """Fixed bearing-range sensor with additive Gaussian noise."""

    position: np.ndarray = (0.0, 0.0)
    bearing_std: float = np.deg2rad(0.1)
    range_std: float = 50.0

    def __post_init__(self):
        object.__setattr__(self, "position", np.asarray(self.position, dtype=float))
        if self.position.shape != (2,):
            raise ValueError("sensor position must be a 2-vector")
        if self.bearing_std <= 0 or self.range_std <= 0:
            raise ValueError("sensor noise stds must be positive")

    def _polar(self, states: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        states = np.atleast_2d(np.asarray(states, dtype=float))
        dx = states[:, 0] - self.position[0]
        dy = states[:, 2] - self.position[1]
        return np.arctan2(dy, dx), np.hypot(dx, dy)

    def log_likelihood_batch(self, y: Observation, states: np.ndarray) -> np.ndarray:
        """Log p(y | state) for (n, 4) states; -inf where the state sits on the sensor."""
        theta, r = self._polar(states)
        bres = wrap_angle(y.bearing - theta)
        rres = y.range - r
        ll = (-0.5 * (bres / self.bearing_std) ** 2
              - 0.5 * (rres / self.range_std) ** 2
              - np.log(2.0 * np.pi * self.bearing_std * self.range_std))
        return np.where(r == 0.0, -np.inf, ll)


def observe(sensor: SensorModel, state: np.ndarray,
            rng: np.random.Generator | None = None, k: int = 0) -> Observation:
    """Measure a state; noiseless when rng is None."""
    state = np.asarray(state, dtype=float)
    theta, r = sensor._polar(state[None, :])
    theta, r = float(theta[0]), float(r[0])
    if r == 0.0:
        raise ValueError("bearing is undefined: target coincides with the sensor")
    if rng is not None:
        theta += sensor.bearing_std * rng.standard_normal()
        r += sensor.range_std * rng.standard_normal()
        if r <= 0.0:
            r = np.finfo(float).tiny  # noise pushed the range through zero
    return Observation(k=k, bearing=float(wrap_angle(theta)), range=r)


def observation_likelihood(sensor: SensorModel, y: Observation, state: np.ndarray) -> float:
    """p(y | state) as a product of bearing and range Gaussian densities."""
    state = np.asarray(state, dtype=float)
    _, r = sensor._polar(state[None, :])
    if float(r[0]) == 0.0:
        warnings.warn("target coincides with the sensor; likelihood is zero",
                      DegenerateGeometryWarning)
        return 0.0
    return float(np.exp(sensor.log_likelihood_batch(y, state[None, :])[0]))


@dataclass(frozen=True)
class Region:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if self.center.shape != (2,):
            raise ValueError("region center must be a 2-vector")
        if not (self.radius > 0.0):
            raise ValueError("region radius must be positive")


@dataclass(frozen=True)
class RegionSet:
    """Sensitive regions plus the scale factor separating 'potential danger'
    from 'safe' in the ground-truth labeler (kappa times the radius)."""

    regions: tuple[Region, ...]
    kappa: float = float(np.sqrt(10.0))

    def __post_init__(self):
        object.__setattr__(self, "regions", tuple(self.regions))
        if not self.regions:
            raise ValueError("need at least one sensitive region")
        if not (self.kappa > 1.0):
            raise ValueError("kappa must exceed 1")

    def distances(self, positions: np.ndarray) -> np.ndarray:
        """Distance of (n, 2) positions to each region center, shape (n, R)."""
        positions = np.atleast_2d(np.asarray(positions, dtype=float))
        centers = np.stack([r.center for r in self.regions])
        return np.linalg.norm(positions[:, None, :] - centers[None, :, :], axis=2)


def generate_truth(waypoints, steps: int, motion: MotionModel,
                   rng: np.random.Generator | None = None) -> np.ndarray:
    """Piecewise constant-velocity trajectory through timed waypoints.

    ``waypoints`` is a sequence of (position, step) pairs with strictly
    increasing steps, the first at 0 and the last at steps - 1. Between
    waypoints the velocity is re-aimed each step at the next waypoint so
    an optional process-noise stream perturbs the path without breaking
    the arrival schedule. Returns an (steps, 4) array.
    """
    wp = [(np.asarray(p, dtype=float), int(k)) for p, k in waypoints]
    if len(wp) < 2:
        raise ValueError("need at least two waypoints")
    ks = [k for _, k in wp]
    if ks[0] != 0 or ks[-1] != steps - 1 or any(b <= a for a, b in zip(ks, ks[1:])):
        raise ValueError(
            "waypoint steps must be strictly increasing, start at 0 and end at steps - 1")

    truth = np.zeros((steps, STATE_DIM))
    pos = wp[0][0].copy()
    seg = 0
    for k in range(steps):
        while seg < len(wp) - 1 and k >= wp[seg + 1][1]:
            seg += 1
        if seg >= len(wp) - 1:
            vel = (wp[-1][0] - wp[-2][0]) / ((wp[-1][1] - wp[-2][1]) * motion.T)
        else:
            target_pos, target_k = wp[seg + 1]
            vel = (target_pos - pos) / ((target_k - k) * motion.T)
        state = np.array([pos[0], vel[0], pos[1], vel[1]])
        truth[k] = state
        pos = motion.step_batch(state[None, :], rng)[0][list(POSITION_IDX)]
    return truth


def build_labels(regions: RegionSet, truth: np.ndarray) -> list[str]:
    """Ground-truth label per step: inside a region is danger, within
    kappa times the radius is potential danger, anything farther is safe."""
    positions = np.atleast_2d(np.asarray(truth, dtype=float))[:, list(POSITION_IDX)]
    dist = regions.distances(positions)
    radii = np.array([r.radius for r in regions.regions])
    in_danger = (dist <= radii[None, :]).any(axis=1)
    in_potential = (dist <= regions.kappa * radii[None, :]).any(axis=1)
    return [DANGER if d else POTENTIAL_DANGER if p else SAFE
            for d, p in zip(in_danger, in_potential)]


def build_knowledge(regions: RegionSet, area, safe_grid: tuple[int, int] = (10, 10),
                    safe_std_factor: float = 0.4,
                    labels: tuple[str, str, str] = DEFAULT_LABELS) -> KnowledgeModel:
    """Construct the three-situation knowledge model from region geometry.

    * danger: one equal-weight component per region, centered on it, with
      diagonal covariance (radius/2)^2 so the region circle is the 2-sigma
      ellipse of its component;
    * potential danger: identical means, diagonal entries exactly 10x;
    * safe: equal-weight dispersed components on a grid over ``area``,
      keeping only grid points outside every potential-danger 2-sigma
      ellipse.

    ``area`` is ((xmin, xmax), (ymin, ymax)).
    """
    (xmin, xmax), (ymin, ymax) = area
    if xmax <= xmin or ymax <= ymin:
        raise ValueError("area bounds must be increasing")

    n = len(regions.regions)
    danger, potential = [], []
    for reg in regions.regions:
        cov = np.diag([(reg.radius / 2.0) ** 2] * 2)
        danger.append(GaussianComponent(1.0 / n, reg.center, cov))
        potential.append(GaussianComponent(1.0 / n, reg.center, 10.0 * cov))

    nx, ny = safe_grid
    dx_cell = (xmax - xmin) / nx
    dy_cell = (ymax - ymin) / ny
    xs = xmin + (np.arange(nx) + 0.5) * dx_cell
    ys = ymin + (np.arange(ny) + 0.5) * dy_cell
    gx, gy = np.meshgrid(xs, ys)
    grid = np.column_stack([gx.ravel(), gy.ravel()])

    # exclusion radius per region: two standard deviations of the
    # potential-danger component, i.e. 2 * sqrt(10) * radius / 2
    excl = np.array([np.sqrt(10.0) * r.radius for r in regions.regions])
    keep = (regions.distances(grid) > excl[None, :]).all(axis=1)
    survivors = grid[keep]
    if survivors.shape[0] == 0:
        raise ValueError("no safe grid points survive outside the potential-danger regions")

    safe_std = safe_std_factor * max(dx_cell, dy_cell)
    safe_cov = np.diag([safe_std ** 2] * 2)
    w = 1.0 / survivors.shape[0]
    safe = [GaussianComponent(w, p, safe_cov) for p in survivors]

    space = SituationSpace(labels)
    by_label = {labels[0]: safe, labels[1]: potential, labels[2]: danger}
    mixtures = tuple(GaussianMixture(by_label[l]) for l in space.labels)
    return KnowledgeModel(space=space, mixtures=mixtures,
                          state_dim=STATE_DIM, projection=POSITION_IDX)
