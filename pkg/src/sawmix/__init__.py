"""Sequential Bayesian situation awareness toolkit.

Two inference engines over a shared Gaussian-mixture knowledge model: a
discrete-situation filter with a Monte-Carlo marginal likelihood, and a
particle filter over the kinematic state whose weighted cloud yields both
a track estimate and the situation posterior.
"""

from .essm import (EssmFilter, GaussianInit, MeasurementInit, ParticleSet, PointInit,
                   effective_sample_size, essm_situation_posterior, pf_init,
                   state_estimate, systematic_resample)
from .hmm import HmmFilter, TransitionMatrix, hmm_predict, hmm_step, hmm_update, mc_likelihood
from .knowledge import (GaussianComponent, GaussianMixture, KnowledgeModel,
                        SituationDistribution, SituationSpace, mixture_density,
                        mixture_sample, situation_given_state)
from .scenario import (MotionModel, Observation, Region, RegionSet, SensorModel,
                       build_knowledge, build_labels, generate_truth, motion_step,
                       observation_likelihood, observe, wrap_angle)
from .streams import substream

__version__ = "0.1.0"
