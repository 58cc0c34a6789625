"""Gaussian-mixture knowledge models.

Expert knowledge about where a target sits in each situation is encoded as
one Gaussian mixture per situation label. The module provides density
evaluation (log-space internally), sampling, and the conditional
distribution over situations given a state, assuming a uniform situation
prior so that p(situation | state) is proportional to the mixture density.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "SituationSpace",
    "GaussianComponent",
    "GaussianMixture",
    "KnowledgeModel",
    "SituationDistribution",
    "mixture_density",
    "mixture_sample",
    "situation_given_state",
]

# Construction tolerances: small config rounding is repaired silently,
# anything larger is treated as a genuine mistake.
WEIGHT_SUM_TOL = 1e-9
# Relative eigenvalue floor below which a covariance is rejected as singular.
COV_EIG_REL_TOL = 1e-12


@dataclass(frozen=True)
class SituationSpace:
    """Ordered set of situation labels; all probability vectors index against it."""

    labels: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        if len(self.labels) < 2:
            raise ValueError("need at least two situation labels")
        if len(set(self.labels)) != len(self.labels):
            raise ValueError("situation labels must be unique")
        if any(not isinstance(l, str) or not l for l in self.labels):
            raise ValueError("situation labels must be non-empty strings")

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, label: str) -> int:
        return self.labels.index(label)


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian: weight in (0, 1], mean vector, SPD covariance."""

    weight: float
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "mean", np.asarray(self.mean, dtype=float))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))
        if self.mean.ndim != 1:
            raise ValueError("component mean must be a vector")
        d = self.mean.shape[0]
        if self.covariance.shape != (d, d):
            raise ValueError(
                f"covariance shape {self.covariance.shape} does not match mean dimension {d}"
            )
        if not (self.weight > 0.0):
            raise ValueError(f"component weight must be positive, got {self.weight}")
        if not np.allclose(self.covariance, self.covariance.T, atol=1e-12):
            raise ValueError("covariance must be symmetric")
        eig = np.linalg.eigvalsh(self.covariance)
        if eig[0] <= COV_EIG_REL_TOL * eig[-1] or eig[-1] <= 0.0:
            raise ValueError("covariance is not positive definite within tolerance")

    @property
    def dim(self) -> int:
        return self.mean.shape[0]


class GaussianMixture:
    """Weighted sum of Gaussian densities over a common d-dimensional space.

    Component weights must sum to 1 within ``WEIGHT_SUM_TOL`` at construction;
    deviations inside the tolerance are renormalized away. The Cholesky
    factor, precision matrix and log-normalization constant of every
    component are precomputed so density evaluation runs in log space.
    Instances are immutable after construction and safe to share.
    """

    def __init__(self, components):
        components = tuple(components)
        if not components:
            raise ValueError("mixture needs at least one component")
        dim = components[0].dim
        if any(c.dim != dim for c in components):
            raise ValueError("all mixture components must share one dimension")
        weights = np.array([c.weight for c in components], dtype=float)
        total = weights.sum()
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise ValueError(f"component weights sum to {total}, not 1")
        weights = weights / total

        self.components = components
        self.dim = dim
        self.weights = weights
        self._means = np.stack([c.mean for c in components])            # (M, d)
        covs = np.stack([c.covariance for c in components])             # (M, d, d)
        self._chols = np.linalg.cholesky(covs)                          # (M, d, d)
        self._precisions = np.linalg.inv(covs)                          # (M, d, d)
        logdets = 2.0 * np.sum(np.log(np.diagonal(self._chols, axis1=1, axis2=2)), axis=1)
        self._log_norms = -0.5 * (dim * np.log(2.0 * np.pi) + logdets)  # (M,)
        self._log_weights = np.log(weights)

    def logpdf(self, x: np.ndarray) -> np.ndarray | float:
        """Log mixture density at one point (d,) or a batch (n, d)."""
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        pts = x[None, :] if single else x
        if pts.shape[-1] != self.dim:
            raise ValueError(f"expected points of dimension {self.dim}, got {pts.shape[-1]}")
        diff = pts[None, :, :] - self._means[:, None, :]                # (M, n, d)
        quad = np.einsum("mnd,mde,mne->mn", diff, self._precisions, diff)
        comp_log = self._log_weights[:, None] + self._log_norms[:, None] - 0.5 * quad
        shift = comp_log.max(axis=0)
        with np.errstate(invalid="ignore"):
            out = shift + np.log(np.exp(comp_log - shift[None, :]).sum(axis=0))
        out = np.where(np.isneginf(shift), -np.inf, out)
        return float(out[0]) if single else out

    def pdf(self, x: np.ndarray) -> np.ndarray | float:
        """Mixture density; exponentiated only at the end for stability."""
        return np.exp(self.logpdf(x))

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """Draw n i.i.d. points: pick a component by weight, then a Gaussian draw."""
        if n < 1:
            raise ValueError("sample count must be at least 1")
        picks = rng.choice(len(self.components), size=n, p=self.weights)
        out = np.empty((n, self.dim))
        for i in range(len(self.components)):
            mask = picks == i
            count = int(mask.sum())
            if count == 0:
                continue
            z = rng.standard_normal((count, self.dim))
            out[mask] = self._means[i] + z @ self._chols[i].T
        return out


@dataclass(frozen=True)
class SituationDistribution:
    """Probability vector over the situation space, in label order.

    ``degenerate`` marks vectors produced by an underflow/zero-evidence
    fallback rather than a genuine Bayes update.
    """

    probs: np.ndarray
    degenerate: bool = False

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        object.__setattr__(self, "probs", probs)
        if probs.ndim != 1 or probs.shape[0] < 2:
            raise ValueError("situation distribution must be a vector of length >= 2")
        if np.any(probs < -1e-15) or not np.all(np.isfinite(probs)):
            raise ValueError("situation probabilities must be finite and non-negative")
        if abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"situation probabilities sum to {probs.sum()}, not 1")

    @staticmethod
    def uniform(m: int, degenerate: bool = False) -> "SituationDistribution":
        return SituationDistribution(np.full(m, 1.0 / m), degenerate=degenerate)

    def argmax(self) -> int:
        """Index of the most probable situation; ties go to the lowest index."""
        return int(np.argmax(self.probs))


@dataclass(frozen=True)
class KnowledgeModel:
    """One Gaussian mixture per situation label over a subspace of the state.

    ``projection`` selects the mixture subspace from the full state vector
    (default: the planar position components of a [x, vx, y, vy] state).
    """

    space: SituationSpace
    mixtures: tuple[GaussianMixture, ...]
    state_dim: int = 4
    projection: tuple[int, ...] = (0, 2)

    def __post_init__(self):
        object.__setattr__(self, "mixtures", tuple(self.mixtures))
        object.__setattr__(self, "projection", tuple(self.projection))
        if len(self.mixtures) != len(self.space):
            raise ValueError("need exactly one mixture per situation label")
        d = len(self.projection)
        if any(mix.dim != d for mix in self.mixtures):
            raise ValueError("all mixtures must match the projection dimension")
        if any(not (0 <= i < self.state_dim) for i in self.projection):
            raise ValueError("projection indices out of range for the state dimension")

    def mixture_for(self, label: str) -> GaussianMixture:
        return self.mixtures[self.space.index(label)]

    def project(self, states: np.ndarray) -> np.ndarray:
        """Select the knowledge subspace from full states, (d,) or (n, d)."""
        states = np.asarray(states, dtype=float)
        return states[..., list(self.projection)]

    def embed(self, points: np.ndarray) -> np.ndarray:
        """Complete subspace points to full states, zero in unused components."""
        points = np.atleast_2d(np.asarray(points, dtype=float))
        full = np.zeros((points.shape[0], self.state_dim))
        full[:, list(self.projection)] = points
        return full

    def log_densities(self, states: np.ndarray) -> np.ndarray:
        """Per-label log densities of projected states, shape (m,) or (m, n)."""
        pts = self.project(states)
        return np.stack([mix.logpdf(pts) for mix in self.mixtures])


def mixture_density(mix: GaussianMixture, x: np.ndarray) -> float:
    """Mixture density at a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != mix.dim:
        raise ValueError(f"expected a vector of dimension {mix.dim}")
    return float(mix.pdf(x))


def mixture_sample(mix: GaussianMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw n i.i.d. samples from the mixture, shape (n, d)."""
    return mix.sample(n, rng)


def situation_given_state(km: KnowledgeModel, x: np.ndarray) -> SituationDistribution:
    """Conditional situation distribution at a full state, uniform prior.

    If every mixture underflows to zero density at x, the result falls back
    to uniform with the degenerate flag set instead of failing the caller.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (km.state_dim,):
        raise ValueError(f"expected a full state of dimension {km.state_dim}")
    logd = km.log_densities(x)
    shift = logd.max()
    if np.isneginf(shift):
        return SituationDistribution.uniform(len(km.space), degenerate=True)
    unnorm = np.exp(logd - shift)
    return SituationDistribution(unnorm / unnorm.sum())
