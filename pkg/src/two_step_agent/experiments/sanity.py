"""Four self-checks of the inference machinery.

1. Explicit plate vs sufficient statistics: the same posterior either way.
2. One extreme patient (x=200) pulls the belief about mean X upwards.
3. Many X observations pull a misplaced prior mean onto the truth.
4. A prediction far above expectation couples N_E and mean A negatively.
"""
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace

import numpy as np
from scipy.stats import ks_2samp

from .. import rng as _rng
from ..errors import TwoStepError
from ..inference import AgentPrior, McmcConfig, Observation, posterior_corr, sample_posterior
from ..inference.posterior import _jsonable
from ..plate import HYPER_NAMES, PlateParams, compose_phi, explicit_plate_phi, sample_aux

log = logging.getLogger(__name__)

SCM_CONSTANTS = (12.0, -0.1, 0.125)
PHI_KS_TOL = 0.05
POSTERIOR_KS_TOL = 0.08
SHIFT_MCSE = 3.0
CONVERGE_TOL = 1.0
CORR_TOL = -0.3

# motivating example 2: A carries no X-dependence, the agent is fairly sure
# about N_E and mean A, and the model predicts far above what it expects
EX2_CONSTANTS = (12.0, -0.1, 0.0)
EX2_PRIOR = AgentPrior(alpha_a_mu=(2.0, 0.2), n_e=(1.0, 0.1))
EX2_X = 80.0
EX2_PRODUCT = 3.0   # N_E * alpha_a_mu implied by the prediction; prior mean is 2


def example2_observation(constants=EX2_CONSTANTS, x=EX2_X, product=EX2_PRODUCT):
    """Observation whose prediction matches ``N_E * alpha_a_mu = product``.

    With no X-term in A the population slope is
    ``b + (a + N_E*mu_A + mu_Y) * E[X] / E[X^2]``.
    """
    a, b, _ = constants
    ex, ex2 = 80.0, 80.0 ** 2 + 10.0 ** 2
    phi = b + (a + product) * ex / ex2
    return Observation(x_new=x, pred=phi * x)


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)
    seconds: float = 0.0
    error: str = ""


@dataclass
class SanityReport:
    checks: list

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def to_dict(self):
        return {"passed": self.passed, "checks": [asdict(c) for c in self.checks]}

    def to_json(self, path=None):
        text = json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def lines(self):
        return [f"{'PASS' if c.passed else 'FAIL'} {c.name}" + (f": {c.error}" if c.error else "")
                for c in self.checks]


def phi_ks(n, draws=2000, seed=0, params=None):
    """KS statistic between collapsed and explicit-plate draws of phi."""
    p = params or PlateParams(n=n)
    p = replace(p, n=n)
    aux = sample_aux(n, _rng.stream(seed, _rng.PLATE, n, 0), size=draws)
    collapsed = compose_phi(p, aux)
    g = _rng.stream(seed, _rng.PLATE, n, 1)
    explicit = np.array([explicit_plate_phi(p, g) for _ in range(draws)])
    return float(ks_2samp(collapsed, explicit).statistic)


def check_plate_equivalence(seed=0, plate_sizes=(10, 100, 1000), phi_sizes=(5, 50, 1000),
                            mcmc=McmcConfig(), prior=AgentPrior(), x=80.0):
    phi_stats = {n: phi_ks(n, seed=seed) for n in phi_sizes}
    obs = Observation(x_new=x, pred=0.19731 * x)
    post = {}
    for n in plate_sizes:
        col = sample_posterior(prior, obs, mcmc, seed=_rng.derive(seed, 1, n), n=n)
        exp = sample_posterior(prior, obs, mcmc, seed=_rng.derive(seed, 2, n), n=n,
                               formulation="explicit")
        post[n] = {name: float(ks_2samp(col.pooled(name), exp.pooled(name)).statistic)
                   for name in HYPER_NAMES}
    worst_phi = max(phi_stats.values())
    worst_post = max(max(v.values()) for v in post.values()) if post else 0.0
    return (worst_phi <= PHI_KS_TOL and worst_post <= POSTERIOR_KS_TOL,
            {"phi_ks": phi_stats, "posterior_ks": post,
             "phi_ks_max": worst_phi, "posterior_ks_max": worst_post})


def check_update_direction(seed=0, plate_sizes=(10, 100, 1000), mcmc=McmcConfig(),
                           prior=AgentPrior(), x=200.0):
    obs = Observation(x_new=x)
    out = {}
    ok = True
    for n in plate_sizes:
        s = sample_posterior(prior, obs, mcmc, seed=_rng.derive(seed, 3, n), n=n)
        shift = s.mean("alpha_x_mu") - prior.mean("alpha_x_mu")
        mcse = s.mcse("alpha_x_mu")
        corr = {f"alpha_x_mu~{k}": posterior_corr(s, "alpha_x_mu", k)
                for k in ("alpha_x_sigma",)}
        passed = shift > 0 and shift >= SHIFT_MCSE * mcse
        ok = ok and passed
        out[n] = {"posterior_mean": s.mean("alpha_x_mu"), "shift": shift, "mcse": mcse,
                  "shift_in_mcse": shift / mcse if mcse > 0 else math.inf,
                  "correlations": corr, "rhat_max": s.rhat_max, "passed": passed}
    return ok, out


def check_convergence(seed=0, mcmc=McmcConfig(), n_obs=1000, prior_mean=70.0, prior_std=5.0,
                      n=1000):
    g = _rng.stream(seed, _rng.BATCH)
    batch = g.normal(80.0, 10.0, n_obs)
    prior = AgentPrior(alpha_x_mu=(prior_mean, prior_std))
    s = sample_posterior(prior, Observation(x_batch=batch), mcmc, seed=_rng.derive(seed, 4), n=n)
    m = s.mean("alpha_x_mu")
    return abs(m - 80.0) <= CONVERGE_TOL, {"posterior_mean": m, "posterior_std": s.std("alpha_x_mu"),
                                           "batch_mean": float(batch.mean()),
                                           "rhat_max": s.rhat_max}


def check_correlation(seed=0, mcmc=McmcConfig(), n=1000):
    obs = example2_observation()
    s = sample_posterior(EX2_PRIOR, obs, mcmc, seed=_rng.derive(seed, 5), scm_constants=EX2_CONSTANTS, n=n)
    r = posterior_corr(s, "n_e", "alpha_a_mu")
    return r <= CORR_TOL, {"corr_n_e_alpha_a_mu": r, "pred": obs.pred,
                           "n_e_mean": s.mean("n_e"), "alpha_a_mu_mean": s.mean("alpha_a_mu"),
                           "rhat_max": s.rhat_max}


def sanity_suite(seed=0, mcmc=McmcConfig(), plate_sizes=(10, 100, 1000), only=None):
    """Run the four checks; a failing or crashing check does not stop the rest."""
    checks = [
        ("plate_equivalence", lambda: check_plate_equivalence(seed, plate_sizes, mcmc=mcmc)),
        ("update_direction", lambda: check_update_direction(seed, plate_sizes, mcmc=mcmc)),
        ("convergence", lambda: check_convergence(seed, mcmc=mcmc)),
        ("correlation", lambda: check_correlation(seed, mcmc=mcmc)),
    ]
    results = []
    for name, fn in checks:
        if only and name not in only:
            continue
        t0 = time.perf_counter()
        try:
            passed, detail = fn()
            res = CheckResult(name, bool(passed), detail)
        except (TwoStepError, ValueError, FloatingPointError) as exc:
            log.exception("check %s crashed", name)
            res = CheckResult(name, False, error=f"{type(exc).__name__}: {exc}")
        res.seconds = time.perf_counter() - t0
        results.append(res)
    return SanityReport(results)
