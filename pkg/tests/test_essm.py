import numpy as np
import pytest

from sawmix.essm import (EssmFilter, GaussianInit, MeasurementInit, ParticleSet, PointInit,
                         effective_sample_size, essm_situation_posterior, pf_init,
                         state_estimate, systematic_resample)
from sawmix.knowledge import (GaussianComponent, GaussianMixture, KnowledgeModel,
                              SituationSpace)
from sawmix.scenario import Observation, SensorModel
from sawmix.streams import substream

from oracles import ConstantSensor, GaussianPositionSensor1D, RandomWalk1D, kalman_1d


SPACE = SituationSpace(("safe", "potential danger", "danger"))


def km_2d(means, std=1.0):
    mixtures = tuple(
        GaussianMixture([GaussianComponent(1.0, m, std ** 2 * np.eye(2))]) for m in means)
    return KnowledgeModel(space=SPACE, mixtures=mixtures, state_dim=4, projection=(0, 2))


# ---------------------------------------------------------------- init

def test_pf_init_uniform_weights():
    p = pf_init(PointInit(np.zeros(4)), 5000, substream(0))
    assert len(p) == 5000
    assert np.all(p.weights == 1.0 / 5000.0)


def test_pf_init_point_mass():
    state = np.array([1.0, 2.0, 3.0, 4.0])
    p = pf_init(PointInit(state), 100, substream(0))
    assert np.all(p.states == state)


def test_pf_init_measurement_anchored_clt():
    sensor = SensorModel()
    y = Observation(k=0, bearing=np.deg2rad(30.0), range=8000.0)
    n = 50_000
    p = pf_init(MeasurementInit(sensor, y, velocity_std=10.0, widen=2.0), n, substream(4))
    anchor = sensor.position + y.range * np.array([np.cos(y.bearing), np.sin(y.bearing)])
    jac = np.array([[-y.range * np.sin(y.bearing), np.cos(y.bearing)],
                    [y.range * np.cos(y.bearing), np.sin(y.bearing)]])
    pos_cov = 2.0 * jac @ np.diag([sensor.bearing_std ** 2, sensor.range_std ** 2]) @ jac.T
    sigma = np.sqrt(np.diag(pos_cov))
    mean_pos = p.states[:, [0, 2]].mean(axis=0)
    assert np.all(np.abs(mean_pos - anchor) < 4.0 * sigma / np.sqrt(n))
    assert abs(p.states[:, 1].std() / 10.0 - 1.0) < 0.05


def test_pf_init_rejects_bad_count():
    with pytest.raises(ValueError):
        pf_init(PointInit(np.zeros(4)), 0, substream(0))


# ---------------------------------------------------------------- resampling

def test_resample_all_weight_on_one_particle():
    states = np.arange(20.0).reshape(10, 2)
    weights = np.zeros(10)
    weights[3] = 1.0
    out = systematic_resample(ParticleSet(states, weights), substream(1))
    assert np.all(out.states == states[3])
    assert np.all(out.weights == 0.1)


def test_resample_equal_weights_copies_every_particle_once():
    n = 64
    states = substream(2).normal(size=(n, 4))
    p = ParticleSet(states, np.full(n, 1.0 / n))
    out = systematic_resample(p, substream(3))
    assert np.array_equal(out.states, states)


def test_resample_output_is_multiset_of_input():
    rng = substream(5)
    n = 200
    states = rng.normal(size=(n, 4))
    w = rng.random(n)
    p = ParticleSet(states, w / w.sum())
    out = systematic_resample(p, rng)
    input_rows = {tuple(row) for row in states}
    assert all(tuple(row) in input_rows for row in out.states)


def test_resample_unbiased_expected_counts():
    n = 1000
    rng = substream(6)
    w = rng.random(n)
    w /= w.sum()
    states = np.arange(n, dtype=float).reshape(n, 1)
    p = ParticleSet(states, w)
    counts = np.zeros(n)
    reps = 200
    for rep in range(reps):
        out = systematic_resample(p, substream(6, "rep", rep))
        idx = out.states[:, 0].astype(int)
        counts += np.bincount(idx, minlength=n)
    mean_counts = counts / reps
    assert np.max(np.abs(mean_counts - n * w)) < 0.15


def test_ess_bounds_and_reset():
    n = 500
    rng = substream(7)
    w = rng.random(n) ** 4
    w /= w.sum()
    ess = effective_sample_size(w)
    assert 1.0 <= ess <= n
    out = systematic_resample(ParticleSet(rng.normal(size=(n, 2)), w), rng)
    assert out.ess() == pytest.approx(n, rel=1e-12)
    assert effective_sample_size(np.eye(n)[0]) == pytest.approx(1.0)


# ---------------------------------------------------------------- estimates and posterior

def test_state_estimate_single_particle():
    state = np.array([[1.0, -2.0, 3.0, 0.5]])
    p = ParticleSet(state, np.array([1.0]))
    assert np.allclose(state_estimate(p), state[0])


def test_state_estimate_symmetric_pair_cancels():
    v = np.array([4.0, 1.0, -2.0, 0.3])
    p = ParticleSet(np.stack([v, -v]), np.array([0.5, 0.5]))
    assert np.allclose(state_estimate(p), 0.0, atol=1e-15)


def test_situation_posterior_identical_mixtures_uniform():
    km = km_2d([(0.0, 0.0)] * 3)
    p = ParticleSet(substream(8).normal(size=(100, 4)), np.full(100, 0.01))
    dist = essm_situation_posterior(p, km)
    assert np.allclose(dist.probs, 1.0 / 3.0, atol=1e-12)


def test_situation_posterior_hand_normalization():
    # two particles, equal weight; densities 0.2/0.2 under one label and
    # 0.6/0.6 under another force the posterior (0.25, 0.75)
    space = SituationSpace(("low", "high"))

    class FixedDensities:
        state_dim = 4
        def __init__(self):
            self.space = space
        def log_densities(self, states):
            n = np.atleast_2d(states).shape[0]
            return np.log(np.vstack([np.full(n, 0.2), np.full(n, 0.6)]))

    p = ParticleSet(np.zeros((2, 4)), np.array([0.5, 0.5]))
    dist = essm_situation_posterior(p, FixedDensities())
    assert np.allclose(dist.probs, [0.25, 0.75], atol=1e-12)


def test_situation_posterior_concentrated_on_danger():
    km = km_2d([(0.0, 0.0), (5000.0, 0.0), (10_000.0, 0.0)], std=50.0)
    states = np.zeros((200, 4))
    states[:, 0] = 10_000.0 + substream(9).normal(0.0, 5.0, size=200)
    p = ParticleSet(states, np.full(200, 1.0 / 200.0))
    dist = essm_situation_posterior(p, km)
    assert dist.probs[2] > 0.999


def test_situation_posterior_rescaling_invariance():
    km = km_2d([(0.0, 0.0), (100.0, 0.0), (0.0, 100.0)], std=60.0)

    class Rescaled:
        def __init__(self, base, shift):
            self.base, self.shift = base, shift
            self.space, self.state_dim = base.space, base.state_dim
        def log_densities(self, states):
            return self.base.log_densities(states) + self.shift

    rng = substream(10)
    states = np.zeros((50, 4))
    states[:, 0] = rng.normal(50.0, 40.0, size=50)
    states[:, 2] = rng.normal(50.0, 40.0, size=50)
    w = rng.random(50)
    p = ParticleSet(states, w / w.sum())
    base = essm_situation_posterior(p, km)
    scaled = essm_situation_posterior(p, Rescaled(km, -700.0), )
    assert np.allclose(base.probs, scaled.probs, atol=1e-10)


def test_situation_posterior_total_underflow_flags_uniform():
    km = km_2d([(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)])
    states = np.zeros((10, 4))
    states[:, 0] = 1e200
    p = ParticleSet(states, np.full(10, 0.1))
    dist = essm_situation_posterior(p, km)
    assert dist.degenerate
    assert np.allclose(dist.probs, 1.0 / 3.0)


# ---------------------------------------------------------------- filter steps

def make_1d_filter(n, q, r, rng):
    particles = pf_init(GaussianInit(np.array([0.0]), np.array([[1.0]])), n, rng)
    return EssmFilter(particles=particles, motion=RandomWalk1D(q),
                      sensor=GaussianPositionSensor1D(r))


def test_pf_step_constant_likelihood_gives_uniform_weights():
    rng = substream(11)
    particles = pf_init(GaussianInit(np.zeros(2), np.eye(2)), 300, rng)
    filt = EssmFilter(particles=particles, motion=RandomWalk1D(0.0),
                      sensor=ConstantSensor(0.5))
    out = filt.step(None, rng)
    assert np.allclose(out.weights, 1.0 / 300.0, atol=1e-15)
    assert not filt.diagnostics[-1].resampled


def test_pf_step_tracks_kalman_oracle_ten_steps():
    q, r, n, steps = 0.1, 2.0, 5000, 10
    world = substream(12, "world")
    x = world.standard_normal()
    ys = [x + r * world.standard_normal()]
    for _ in range(steps - 1):
        x += q * world.standard_normal()
        ys.append(x + r * world.standard_normal())
    kf_mean, _ = kalman_1d(ys, 0.0, 1.0, q, r)

    reps = 30
    means = np.empty((reps, steps))
    for rep in range(reps):
        rng = substream(12, "pf", rep)
        filt = make_1d_filter(n, q, r, rng)
        filt.motion = RandomWalk1D(0.0)  # first measurement updates the prior
        filt.step(ys[0], rng)
        filt.motion = RandomWalk1D(q)
        means[rep, 0] = state_estimate(filt.particles)[0]
        for k in range(1, steps):
            filt.step(ys[k], rng)
            means[rep, k] = state_estimate(filt.particles)[0]
    se = means.std(axis=0, ddof=1)
    dev = np.abs(means - kf_mean[None, :])
    ok = (dev <= 3.0 * se[None, :]).all(axis=1)
    assert ok.sum() >= reps - 2


def test_pf_step_delta_likelihood_concentrates_weight():
    rng = substream(13)
    n = 400
    states = np.zeros((n, 1))
    states[:, 0] = np.arange(n, dtype=float)
    filt = EssmFilter(particles=ParticleSet(states, np.full(n, 1.0 / n)),
                      motion=RandomWalk1D(0.0),
                      sensor=GaussianPositionSensor1D(1e-3))
    out = filt.step(250.0, rng)  # noiseless motion, near-delta likelihood at 250
    assert out.weights.max() > 0.999 or np.all(out.states[:, 0] == 250.0)


def test_pf_step_underflow_resets_uniform_and_flags():
    rng = substream(14)
    filt = make_1d_filter(200, 0.0, 1e-6, rng)
    out = filt.step(1e9, rng)
    d = filt.diagnostics[-1]
    assert d.diverged
    assert np.allclose(out.weights, 1.0 / 200.0)


def test_pf_step_weights_normalized_and_ess_in_bounds():
    rng = substream(15)
    filt = make_1d_filter(500, 0.3, 0.5, rng)
    y = 0.0
    for k in range(25):
        y += 0.3
        out = filt.step(y, rng)
        d = filt.diagnostics[-1]
        assert abs(out.weights.sum() - 1.0) < 1e-9
        assert 1.0 <= d.ess <= 500.0 + 1e-9
        if d.resampled:
            assert out.ess() == pytest.approx(500.0, rel=1e-12)


def test_pf_determinism_bit_identical():
    def run():
        rng = substream(16)
        filt = make_1d_filter(300, 0.2, 1.0, rng)
        outs = []
        for k in range(12):
            filt.step(0.1 * k, rng)
            outs.append((filt.particles.states.copy(), filt.particles.weights.copy()))
        return outs

    for (sa, wa), (sb, wb) in zip(run(), run()):
        assert np.array_equal(sa, sb)
        assert np.array_equal(wa, wb)


def test_particle_set_validation():
    with pytest.raises(ValueError):
        ParticleSet(np.zeros((3, 2)), np.array([0.5, 0.4, 0.2]))
    with pytest.raises(ValueError):
        ParticleSet(np.zeros((2, 2)), np.array([1.5, -0.5]))


def test_filter_without_knowledge_model_rejects_posterior():
    filt = make_1d_filter(10, 0.1, 1.0, substream(17))
    with pytest.raises(ValueError):
        filt.situation_posterior()
