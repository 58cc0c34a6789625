"""Particle filter over the kinematic state with a situation readout.

The continuous state is tracked by a bootstrap particle filter (transition
prior as proposal, sensor likelihood as weight). The situation posterior
is then a weighted sum of the knowledge-mixture densities at the particles,
normalized over labels, so both the track and the situation come out of
one pass over the data.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .knowledge import KnowledgeModel, SituationDistribution

__all__ = [
    "ParticleSet",
    "StepDiagnostics",
    "EssmFilter",
    "GaussianInit",
    "PointInit",
    "MeasurementInit",
    "pf_init",
    "systematic_resample",
    "effective_sample_size",
    "essm_situation_posterior",
    "state_estimate",
]

WEIGHT_SUM_TOL = 1e-9
# Linear-space floor below which a whole weight vector counts as diverged.
WEIGHT_UNDERFLOW = 1e-300
DEFAULT_PARTICLES = 5000
DEFAULT_ESS_FRACTION = 0.5


@dataclass(frozen=True)
class ParticleSet:
    """Weighted states approximating the filtering distribution."""

    states: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        states = np.atleast_2d(np.asarray(self.states, dtype=float))
        weights = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", weights)
        if weights.shape != (states.shape[0],):
            raise ValueError("need one weight per particle")
        if np.any(weights < 0.0) or not np.all(np.isfinite(weights)):
            raise ValueError("weights must be finite and non-negative")
        if abs(weights.sum() - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"weights sum to {weights.sum()}, not 1")

    def __len__(self) -> int:
        return self.states.shape[0]

    def ess(self) -> float:
        return effective_sample_size(self.weights)


def effective_sample_size(weights: np.ndarray) -> float:
    """1 / sum(w^2); N when uniform, 1 when collapsed onto one particle."""
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


def systematic_resample(particles: ParticleSet, rng: np.random.Generator) -> ParticleSet:
    """Low-variance resampling: one uniform offset across stratified positions.

    Every output state is a copy of an input state and the expected copy
    count of particle i is N * w_i; weights reset to 1/N.
    """
    n = len(particles)
    positions = (rng.random() + np.arange(n)) / n
    cumulative = np.cumsum(particles.weights)
    idx = np.searchsorted(cumulative, positions, side="right")
    idx = np.minimum(idx, n - 1)  # guard against cumulative[-1] < 1 by rounding
    return ParticleSet(particles.states[idx].copy(), np.full(n, 1.0 / n))


def state_estimate(particles: ParticleSet) -> np.ndarray:
    """Weighted mean state."""
    return particles.weights @ particles.states


def essm_situation_posterior(particles: ParticleSet, km: KnowledgeModel) -> SituationDistribution:
    """Situation distribution read off the weighted particles.

    Entry for a label is sum_i w_i * p(state_i | label), normalized over
    labels. Computed with a shared log shift so a common rescaling of all
    mixture densities cannot change the result; total underflow falls back
    to uniform with the degenerate flag.
    """
    logd = km.log_densities(particles.states)          # (m, n)
    shift = logd.max()
    if np.isneginf(shift):
        return SituationDistribution.uniform(len(km.space), degenerate=True)
    per_label = np.exp(logd - shift) @ particles.weights
    total = per_label.sum()
    if total == 0.0:
        return SituationDistribution.uniform(len(km.space), degenerate=True)
    return SituationDistribution(per_label / total)


@dataclass(frozen=True)
class GaussianInit:
    mean: np.ndarray
    cov: np.ndarray


@dataclass(frozen=True)
class PointInit:
    state: np.ndarray


@dataclass(frozen=True)
class MeasurementInit:
    """Anchor the initial cloud on the first bearing-range measurement.

    Positions are drawn around the polar-to-Cartesian point with the
    linearized measurement-noise covariance widened by ``widen``;
    velocities are zero-mean Gaussian with std ``velocity_std``.
    """

    sensor: object
    observation: object
    velocity_std: float = 10.0
    widen: float = 2.0


def pf_init(init_spec, n: int, rng: np.random.Generator) -> ParticleSet:
    """Draw the initial particle set with uniform weights 1/N."""
    if n < 1:
        raise ValueError("particle count must be at least 1")
    if isinstance(init_spec, PointInit):
        state = np.asarray(init_spec.state, dtype=float)
        states = np.tile(state, (n, 1))
    elif isinstance(init_spec, GaussianInit):
        mean = np.asarray(init_spec.mean, dtype=float)
        cov = np.asarray(init_spec.cov, dtype=float)
        chol = np.linalg.cholesky(cov)
        states = mean + rng.standard_normal((n, mean.shape[0])) @ chol.T
    elif isinstance(init_spec, MeasurementInit):
        y = init_spec.observation
        sensor = init_spec.sensor
        anchor = sensor.position + y.range * np.array([np.cos(y.bearing), np.sin(y.bearing)])
        jac = np.array([
            [-y.range * np.sin(y.bearing), np.cos(y.bearing)],
            [y.range * np.cos(y.bearing), np.sin(y.bearing)],
        ])
        noise_cov = np.diag([sensor.bearing_std ** 2, sensor.range_std ** 2])
        pos_cov = init_spec.widen * (jac @ noise_cov @ jac.T)
        pos = anchor + rng.standard_normal((n, 2)) @ np.linalg.cholesky(pos_cov).T
        vel = init_spec.velocity_std * rng.standard_normal((n, 2))
        states = np.column_stack([pos[:, 0], vel[:, 0], pos[:, 1], vel[:, 1]])
    else:
        raise ValueError(f"unsupported init spec {type(init_spec).__name__}")
    return ParticleSet(states, np.full(n, 1.0 / n))


@dataclass(frozen=True)
class StepDiagnostics:
    k: int
    ess: float
    resampled: bool
    diverged: bool


@dataclass
class EssmFilter:
    """Bootstrap particle filter with ESS-triggered systematic resampling.

    ``motion`` must provide ``step_batch(states, rng)`` and ``sensor``
    ``log_likelihood_batch(y, states)``. The knowledge model is only needed
    when the situation posterior is read out, so toy state-only instances
    may pass ``km=None``.
    """

    particles: ParticleSet
    motion: object
    sensor: object
    km: KnowledgeModel | None = None
    ess_threshold: float = DEFAULT_ESS_FRACTION
    step_index: int = 0
    diagnostics: list = field(default_factory=list)

    def step(self, y, rng: np.random.Generator) -> ParticleSet:
        """Propagate, reweight with the measurement, resample if degenerate.

        Weights accumulate across steps (prior weight times likelihood, the
        importance-sampling form with the transition prior as proposal);
        right after a resample this reduces to the plain normalized
        likelihood. If every likelihood underflows the weights reset to
        uniform and the step is flagged as diverged.
        """
        self.step_index += 1
        states = self.motion.step_batch(self.particles.states, rng)
        loglik = np.asarray(self.sensor.log_likelihood_batch(y, states), dtype=float)

        diverged = False
        max_ll = loglik.max()
        if not np.isfinite(max_ll) or np.exp(max_ll) < WEIGHT_UNDERFLOW:
            weights = np.full(len(self.particles), 1.0 / len(self.particles))
            diverged = True
        else:
            with np.errstate(divide="ignore"):
                logw = np.log(self.particles.weights) + loglik
            logw -= logw.max()
            weights = np.exp(logw)
            weights /= weights.sum()

        ess = effective_sample_size(weights)
        particles = ParticleSet(states, weights)
        resampled = False
        if ess < self.ess_threshold * len(particles):
            particles = systematic_resample(particles, rng)
            resampled = True

        self.diagnostics.append(StepDiagnostics(self.step_index, ess, resampled, diverged))
        self.particles = particles
        return particles

    def situation_posterior(self) -> SituationDistribution:
        if self.km is None:
            raise ValueError("filter has no knowledge model attached")
        return essm_situation_posterior(self.particles, self.km)

    def estimate(self) -> np.ndarray:
        return state_estimate(self.particles)
