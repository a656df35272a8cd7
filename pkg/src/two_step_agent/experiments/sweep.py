"""Prior-misalignment sweeps with and without decision support."""
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence, Union

import numpy as np

from .. import rng as _rng
from ..decision import DecisionConfig, act
from ..errors import TwoStepError
from ..inference import AgentPrior, McmcConfig
from ..inference.prior import SWEEPABLE
from ..predictor import SlopeOnlyLinearModel, fit_ols_no_intercept, predict
from ..scm import LinearGaussianScm, outcome_under_do, sample_historical

log = logging.getLogger(__name__)

WITH_DS = "with_ds"
WITHOUT_DS = "without_ds"

# SCM reference value of each sweepable prior mean, for offset grids.
def reference_value(scm: LinearGaussianScm, param):
    param = SWEEPABLE[param]
    return {
        "n_e": scm.treat_effect_e,
        "alpha_a_mu": scm.noise_a[0],
        "alpha_x_mu": scm.noise_x[0],
        "alpha_y_mu": scm.noise_y[0],
    }[param]


def default_grid(prior: AgentPrior, scm: LinearGaussianScm, param, width=3.0, steps=7):
    """``steps`` offsets spanning +-``width`` prior stds around the reference."""
    sd = prior.std(SWEEPABLE[param])
    return [float(v) for v in np.linspace(-width * sd, width * sd, steps)]


@dataclass(frozen=True)
class SweepConfig:
    varied_param: str = "n_e"
    grid: Sequence[float] = (0.0, 0.5, 1.0, 1.5, 2.0)
    grid_mode: str = "absolute"
    replicates: int = 8
    x_new: Union[float, str] = 80.0
    scm: LinearGaussianScm = field(default_factory=LinearGaussianScm)
    base_prior: AgentPrior = field(default_factory=AgentPrior)
    decision: DecisionConfig = field(default_factory=DecisionConfig)
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    n_train: int = 1000
    refit_per_point: bool = False

    def __post_init__(self):
        if self.varied_param not in SWEEPABLE:
            raise ValueError(f"cannot sweep {self.varied_param!r}; choose from {sorted(set(SWEEPABLE.values()))}")
        if len(self.grid) == 0:
            raise ValueError("sweep grid must be nonempty")
        if self.replicates < 1:
            raise ValueError("replicates must be >= 1")
        if self.grid_mode not in ("absolute", "offset"):
            raise ValueError("grid_mode must be 'absolute' or 'offset'")
        if isinstance(self.x_new, str) and self.x_new != "sample":
            raise ValueError("x_new must be a number or 'sample'")
        object.__setattr__(self, "grid", tuple(float(g) for g in self.grid))

    def prior_mean(self, grid_value):
        if self.grid_mode == "offset":
            return reference_value(self.scm, self.varied_param) + grid_value
        return grid_value

    def prior_at(self, grid_value):
        return self.base_prior.with_mean(self.varied_param, self.prior_mean(grid_value))


@dataclass
class SweepRecord:
    grid_value: float
    replicate: int
    arm: str
    x_new: float
    pred: Optional[float]
    cate_mean: float
    cate_std: float
    dose: float
    outcome_y: float
    in_gray_band: bool
    rhat_max: float
    flagged: bool
    # outcome of the same patient under the historical protocol; JSON only
    outcome_hist: float = float("nan")
    noise_y: float = float("nan")


def _patient(cfg, seed, gi, r):
    g = _rng.stream(seed, _rng.PATIENT, gi, r)
    eps = g.standard_normal(3)
    scm = cfg.scm
    if cfg.x_new == "sample":
        x = scm.noise_x[0] + scm.noise_x[1] * eps[0]
    else:
        x = float(cfg.x_new)
    noise_y = scm.noise_y[0] + scm.noise_y[1] * eps[1]
    hist_dose = scm.assign_coeff_d * x + scm.noise_a[0] + scm.noise_a[1] * eps[2]
    return float(x), float(noise_y), float(hist_dose)


def _run_point(cfg: SweepConfig, model: SlopeOnlyLinearModel, seed, gi, r):
    gv = cfg.grid[gi]
    prior = cfg.prior_at(gv)
    x, noise_y, hist_dose = _patient(cfg, seed, gi, r)
    constants = cfg.scm.constants
    true_cate = cfg.scm.treat_effect_e * cfg.decision.dose_gap
    y_hist = float(outcome_under_do(cfg.scm, x, hist_dose, noise_y))
    out = {}
    for arm, m in ((WITH_DS, model), (WITHOUT_DS, None)):
        sub_seed = _rng.derive(seed, _rng.INFERENCE, gi, r, arm)
        try:
            dose, cate, samples = act(prior, m, x, cfg.decision, seed=sub_seed, mcmc=cfg.mcmc,
                                      scm_constants=constants, n=cfg.n_train)
            flagged = not samples.converged
            rhat = samples.rhat_max
            cm, cs, dv = cate.mean, cate.std, float(dose)
        except TwoStepError as exc:
            log.warning("grid %s replicate %s arm %s failed: %s", gv, r, arm, exc)
            flagged, rhat, cm, cs, dv = True, float("nan"), float("nan"), float("nan"), float("nan")
        y = float(outcome_under_do(cfg.scm, x, dv, noise_y))
        out[arm] = (cm, cs, dv, y, rhat, flagged)
    cm_w, cs_w = out[WITH_DS][0], out[WITH_DS][1]
    in_band = bool(abs(true_cate - cm_w) <= cs_w)
    pred = float(predict(model, x))
    records = []
    for arm in (WITH_DS, WITHOUT_DS):
        cm, cs, dv, y, rhat, flagged = out[arm]
        records.append(SweepRecord(gv, r, arm, x, pred if arm == WITH_DS else None, cm, cs, dv,
                                   y, in_band, rhat, flagged, y_hist, noise_y))
    return records


def _fit_model(cfg, seed, gi=None):
    if gi is None or not cfg.refit_per_point:
        cohort = sample_historical(cfg.scm, cfg.n_train, seed)
    else:
        cohort = sample_historical(cfg.scm, cfg.n_train, _rng.stream(seed, _rng.COHORT, gi))
    return fit_ols_no_intercept(cohort)


def _task(args):
    cfg, seed, gi, r = args
    return _run_point(cfg, _fit_model(cfg, seed, gi), seed, gi, r)


def run_sweep(cfg: SweepConfig, seed=0, jobs=1):
    """Run every grid value x replicate, both arms; returns a list of records.

    Output is independent of ``jobs``: each task draws from its own stream
    keyed on (seed, grid index, replicate, arm).
    """
    tasks = [(cfg, seed, gi, r) for gi in range(len(cfg.grid)) for r in range(cfg.replicates)]
    if jobs and jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_task, tasks))
    else:
        model = None if cfg.refit_per_point else _fit_model(cfg, seed)
        results = []
        for t in tasks:
            if model is None:
                results.append(_task(t))
            else:
                results.append(_run_point(cfg, model, seed, t[2], t[3]))
            log.info("grid %s replicate %s done", cfg.grid[t[2]], t[3])
    return [rec for recs in results for rec in recs]


def grid_means(records, arm, field_name="outcome_y"):
    """Mean of one record field per grid value for one arm, in grid order."""
    out = {}
    for rec in records:
        if rec.arm == arm:
            out.setdefault(rec.grid_value, []).append(getattr(rec, field_name))
    return {k: float(np.mean(v)) for k, v in out.items()}
