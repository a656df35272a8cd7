"""The agent's prior beliefs, observations and latent states."""
import math
from dataclasses import dataclass, field, fields, replace
from typing import Optional, Sequence

import numpy as np
from scipy.special import log_ndtr

from ..plate import AUX_NAMES, HYPER_NAMES, AuxDraw, PlateParams

LOG_2PI = math.log(2.0 * math.pi)

SIGMA_NAMES = ("alpha_x_sigma", "alpha_a_sigma", "alpha_y_sigma")
STATE_NAMES = HYPER_NAMES + AUX_NAMES

# Names accepted for the prior mean being swept, mapped to prior fields.
SWEEPABLE = {
    "n_e": "n_e", "N_E": "n_e", "N_E-mean": "n_e",
    "alpha_a_mu": "alpha_a_mu", "mu_a": "alpha_a_mu", "alpha_a_mu-mean": "alpha_a_mu",
    "alpha_x_mu": "alpha_x_mu", "mu_x": "alpha_x_mu", "alpha_x_mu-mean": "alpha_x_mu",
    "alpha_y_mu": "alpha_y_mu", "mu_y": "alpha_y_mu", "alpha_y_mu-mean": "alpha_y_mu",
}


def _pair(v):
    mean, std = v
    return (float(mean), float(std))


@dataclass(frozen=True)
class AgentPrior:
    """Independent Normal priors given as (mean, std) per hyperparameter.

    The three ``*_sigma`` priors are truncated to ``[0, inf)``. Defaults are
    the "correct agent", whose means match the historical SCM.
    """

    alpha_x_mu: tuple = (80.0, 0.1)
    alpha_x_sigma: tuple = (10.0, 0.1)
    alpha_a_mu: tuple = (2.0, 1.0)
    alpha_a_sigma: tuple = (1.0, 0.1)
    alpha_y_mu: tuple = (0.0, 0.01)
    alpha_y_sigma: tuple = (0.1, 0.01)
    n_e: tuple = (1.0, 0.1)

    def __post_init__(self):
        for f in fields(self):
            mean, std = _pair(getattr(self, f.name))
            if not std > 0:
                raise ValueError(f"prior std for {f.name} must be > 0, got {std}")
            object.__setattr__(self, f.name, (mean, std))

    def mean(self, name):
        return getattr(self, name)[0]

    def std(self, name):
        return getattr(self, name)[1]

    def with_mean(self, name, value):
        name = SWEEPABLE.get(name, name)
        return replace(self, **{name: (float(value), self.std(name))})

    def with_std(self, name, value):
        return replace(self, **{name: (self.mean(name), float(value))})

    def to_dict(self):
        return {f.name: list(getattr(self, f.name)) for f in fields(self)}

    @classmethod
    def from_dict(cls, d):
        return cls(**{k: tuple(v) for k, v in d.items()})

    def log_density(self, name, value):
        """Log prior density of one hyperparameter (with truncation constant)."""
        mean, std = getattr(self, name)
        if name in SIGMA_NAMES:
            if value < 0:
                return -math.inf
            return normal_logpdf(value, mean, std) - float(log_ndtr(mean / std))
        return normal_logpdf(value, mean, std)

    def draw(self, rng, size=None):
        """Draw hyperparameters; truncated priors by rejection."""
        out = {}
        for name in HYPER_NAMES:
            mean, std = getattr(self, name)
            v = rng.normal(mean, std, size)
            if name in SIGMA_NAMES:
                v = np.atleast_1d(v)
                bad = v < 0
                while bad.any():
                    v[bad] = rng.normal(mean, std, int(bad.sum()))
                    bad = v < 0
                if size is None:
                    v = float(v[0])
            out[name] = v
        return out


def normal_logpdf(x, mean, std):
    z = (x - mean) / std
    return -0.5 * z * z - math.log(std) - 0.5 * LOG_2PI


@dataclass(frozen=True)
class Observation:
    """What the agent conditions on: a new patient, its prediction, extra x's."""

    x_new: Optional[float] = None
    pred: Optional[float] = None
    x_batch: Sequence[float] = field(default_factory=tuple)

    def __post_init__(self):
        if self.pred is not None and self.x_new is None:
            raise ValueError("an observed prediction requires the patient covariate x_new")
        object.__setattr__(self, "x_batch", tuple(float(v) for v in self.x_batch))

    @property
    def is_empty(self):
        return self.x_new is None and not self.x_batch


@dataclass(frozen=True)
class LatentState:
    alpha_x_mu: float
    alpha_x_sigma: float
    alpha_a_mu: float
    alpha_a_sigma: float
    alpha_y_mu: float
    alpha_y_sigma: float
    n_e: float
    aux: AuxDraw

    def as_array(self):
        return np.array([getattr(self, k) for k in HYPER_NAMES]
                        + [getattr(self.aux, k) for k in AUX_NAMES])

    @classmethod
    def from_array(cls, arr):
        arr = [float(v) for v in arr]
        return cls(*arr[:7], aux=AuxDraw(*arr[7:15]))

    def plate_params(self, constants, n):
        a, b, d = constants
        return PlateParams(self.alpha_x_mu, self.alpha_x_sigma, self.alpha_a_mu,
                           self.alpha_a_sigma, self.alpha_y_mu, self.alpha_y_sigma,
                           self.n_e, n=n, a=a, b=b, d=d)

    @classmethod
    def prior_means(cls, prior: AgentPrior, n):
        """Hyperparameters at prior means, aux at their distribution means."""
        k = n - 1.0
        return cls(*(prior.mean(k_) for k_ in HYPER_NAMES),
                   aux=AuxDraw(0.0, 0.0, 0.0, k, k, k, k, k))
