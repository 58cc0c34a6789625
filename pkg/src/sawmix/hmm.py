"""Discrete-situation filter: Markov prediction plus a Monte-Carlo likelihood.

The measurement only touches the situation through the kinematic state, so
the per-situation likelihood is marginalized numerically: sample states
from the situation's knowledge mixture and average the sensor likelihood
over them. Prediction and Bayes update are exact vector operations.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .knowledge import KnowledgeModel, SituationDistribution, SituationSpace
from .streams import substream

__all__ = [
    "TransitionMatrix",
    "HmmFilter",
    "hmm_predict",
    "hmm_update",
    "mc_likelihood",
    "hmm_step",
]

ROW_SUM_TOL = 1e-9

DEFAULT_MC_SAMPLES = 10_000


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic situation transition matrix, probs[i][j] = p(next=j | now=i)."""

    probs: np.ndarray

    def __post_init__(self):
        probs = np.asarray(self.probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != probs.shape[1]:
            raise ValueError("transition matrix must be square")
        if np.any(probs < 0.0) or np.any(probs > 1.0 + ROW_SUM_TOL):
            raise ValueError("transition probabilities must lie in [0, 1]")
        sums = probs.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > ROW_SUM_TOL):
            raise ValueError(f"transition rows must sum to 1, got {sums}")
        object.__setattr__(self, "probs", probs / sums[:, None])

    @property
    def m(self) -> int:
        return self.probs.shape[0]


def hmm_predict(prior: SituationDistribution, trans: TransitionMatrix) -> SituationDistribution:
    """Push the situation distribution one step through the transition matrix."""
    if prior.probs.shape[0] != trans.m:
        raise ValueError("situation distribution and transition matrix disagree in size")
    return SituationDistribution(prior.probs @ trans.probs, degenerate=prior.degenerate)


def hmm_update(pred: SituationDistribution, likelihoods: np.ndarray) -> SituationDistribution:
    """Bayes update of the predictive distribution with per-label likelihoods.

    A zero-evidence update (all products zero) keeps the predictive
    distribution and sets the degenerate flag instead of failing.
    """
    lik = np.asarray(likelihoods, dtype=float)
    if lik.shape != pred.probs.shape:
        raise ValueError("likelihood vector and distribution disagree in size")
    if np.any(lik < 0.0) or not np.all(np.isfinite(lik)):
        raise ValueError("likelihoods must be finite and non-negative")
    unnorm = pred.probs * lik
    total = unnorm.sum()
    if total == 0.0:
        return SituationDistribution(pred.probs, degenerate=True)
    return SituationDistribution(unnorm / total)


def mc_likelihood(km: KnowledgeModel, label: str, y, sensor, n: int,
                  rng: np.random.Generator) -> float:
    """Monte-Carlo estimate of p(y | situation): mean sensor likelihood over
    n states sampled from the situation's knowledge mixture.

    Sampled subspace points are completed to full states with zeros in the
    unused components; the sensor only reads the position block. The mean
    is formed in log space so that tiny likelihoods do not underflow before
    averaging; if every sample underflows the estimate is exactly 0.
    """
    if n < 1:
        raise ValueError("sample count must be at least 1")
    pts = km.mixture_for(label).sample(n, rng)
    states = km.embed(pts)
    ll = np.asarray(sensor.log_likelihood_batch(y, states), dtype=float)
    shift = ll.max()
    if np.isneginf(shift):
        return 0.0
    return float(np.exp(shift) * np.mean(np.exp(ll - shift)))


@dataclass
class HmmFilter:
    """Recursive situation filter over a fixed label space.

    The posterior starts at ``initial`` (uniform unless configured) and is
    advanced one measurement at a time. Monte-Carlo samples are drawn from
    a substream keyed by (seed, step, label index) so reruns are
    bit-identical and labels never share draws.
    """

    space: SituationSpace
    transition: TransitionMatrix
    km: KnowledgeModel
    mc_samples: int = DEFAULT_MC_SAMPLES
    seed: int = 0
    posterior: SituationDistribution | None = None
    step_index: int = 0
    degenerate_steps: list = field(default_factory=list)

    def __post_init__(self):
        if self.transition.m != len(self.space):
            raise ValueError("transition matrix size does not match the situation space")
        if self.posterior is None:
            self.posterior = SituationDistribution.uniform(len(self.space))
        if self.mc_samples < 1:
            raise ValueError("mc_samples must be at least 1")

    def step(self, y, sensor, rng: np.random.Generator | None = None) -> SituationDistribution:
        """Advance the posterior with one measurement and return it.

        When ``rng`` is given it is consumed sequentially across labels
        (useful for tests); otherwise per-(step, label) substreams are
        derived from the filter seed.
        """
        self.step_index += 1
        pred = hmm_predict(self.posterior, self.transition)
        lik = np.empty(len(self.space))
        for j, label in enumerate(self.space.labels):
            stream = rng if rng is not None else substream(self.seed, "hmm", self.step_index, j)
            lik[j] = mc_likelihood(self.km, label, y, sensor, self.mc_samples, stream)
        post = hmm_update(pred, lik)
        if post.degenerate:
            self.degenerate_steps.append(self.step_index)
        self.posterior = post
        return post


def hmm_step(filt: HmmFilter, y, sensor,
             rng: np.random.Generator | None = None) -> SituationDistribution:
    """Functional alias for :meth:`HmmFilter.step`."""
    return filt.step(y, sensor, rng)
