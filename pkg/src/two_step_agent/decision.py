"""Second step: CATE under the updated beliefs and the threshold rule."""
from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np

from .inference import AgentPrior, McmcConfig, Observation, sample_posterior, sample_prior
from .predictor import SlopeOnlyLinearModel, predict
from .scm import Dose


@dataclass(frozen=True)
class DecisionConfig:
    dose_low: float = 10.0
    dose_high: float = 20.0
    threshold_tau: float = 5.0

    def __post_init__(self):
        if not self.dose_high > self.dose_low:
            raise ValueError("dose_high must exceed dose_low")

    @property
    def dose_gap(self):
        return self.dose_high - self.dose_low

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class CateEstimate:
    mean: float
    std: float
    per_draw: np.ndarray


def interventional_mean(samples, x, dose, scm_constants):
    """Per-draw E[Y | X=x, do(A=dose)] under each sampled SCM."""
    a, b, _ = scm_constants
    return a + b * x + samples.pooled("n_e") * dose + samples.pooled("alpha_y_mu")


def estimate_cate(samples, x_new, cfg: DecisionConfig = DecisionConfig(),
                  scm_constants=(12.0, -0.1, 0.125)) -> CateEstimate:
    """High-dose minus low-dose expected outcome, averaged over the draws."""
    if samples.values.size == 0:
        raise ValueError("no draws to estimate the CATE from")
    per_draw = (interventional_mean(samples, x_new, cfg.dose_high, scm_constants)
                - interventional_mean(samples, x_new, cfg.dose_low, scm_constants))
    std = float(np.std(per_draw, ddof=1)) if per_draw.size > 1 else 0.0
    return CateEstimate(float(np.mean(per_draw)), std, per_draw)


def decide(cate: CateEstimate, cfg: DecisionConfig = DecisionConfig()) -> Dose:
    """High dose iff the expected CATE strictly exceeds the threshold."""
    pair = (cfg.dose_low, cfg.dose_high)
    if cate.mean > cfg.threshold_tau:
        return Dose(cfg.dose_high, pair)
    return Dose(cfg.dose_low, pair)


def act(prior: AgentPrior, model: Optional[SlopeOnlyLinearModel], x_new,
        cfg: DecisionConfig = DecisionConfig(), seed=0, mcmc: McmcConfig = McmcConfig(),
        scm_constants=(12.0, -0.1, 0.125), n=1000):
    """Full decision pipeline for one patient.

    With a model, the agent conditions on ``(x_new, model prediction)``;
    without one, it decides from its prior.

    Returns
    -------
    (dose, cate, samples)
    """
    if model is None:
        samples = sample_prior(prior, mcmc, seed=seed, n=n)
    else:
        obs = Observation(x_new=float(x_new), pred=float(predict(model, x_new)))
        samples = sample_posterior(prior, obs, mcmc, seed=seed, scm_constants=scm_constants, n=n)
    cate = estimate_cate(samples, x_new, cfg, scm_constants)
    return decide(cate, cfg), cate, samples
