"""Agent belief model: priors, log densities, posterior sampling."""
from .density import CollapsedTarget, ExplicitPlateTarget, log_joint
from .posterior import (McmcConfig, PosteriorSamples, effective_sample_size, posterior_corr,
                        sample_posterior, sample_prior, split_rhat)
from .prior import STATE_NAMES, AgentPrior, LatentState, Observation

__all__ = [
    "AgentPrior", "CollapsedTarget", "ExplicitPlateTarget", "LatentState", "McmcConfig",
    "Observation", "PosteriorSamples", "STATE_NAMES", "effective_sample_size", "log_joint",
    "posterior_corr", "sample_posterior", "sample_prior", "split_rhat",
]
