import numpy as np
import pytest

from two_step_agent.decision import CateEstimate, DecisionConfig, act, decide, estimate_cate, interventional_mean
from two_step_agent.inference import AgentPrior, McmcConfig, sample_prior
from two_step_agent.predictor import SlopeOnlyLinearModel


def test_cate_equals_effect_times_dose_gap():
    s = sample_prior(AgentPrior(), McmcConfig(chains=2, draws=500), seed=0)
    cate = estimate_cate(s, 80.0)
    assert np.allclose(cate.per_draw, 10.0 * s.pooled("n_e"), rtol=0, atol=1e-9)
    assert cate.mean == pytest.approx(10.0 * s.mean("n_e"))


def test_interventional_mean_formula():
    s = sample_prior(AgentPrior(), McmcConfig(chains=1, draws=3), seed=1)
    m = interventional_mean(s, 80.0, 20.0, (12.0, -0.1, 0.125))
    assert np.allclose(m, 12.0 - 8.0 + 20.0 * s.pooled("n_e") + s.pooled("alpha_y_mu"))


def test_decide_threshold_and_tie():
    cfg = DecisionConfig()
    assert float(decide(CateEstimate(5.0001, 0.0, None), cfg)) == 20.0
    assert float(decide(CateEstimate(5.0, 0.0, None), cfg)) == 10.0
    assert float(decide(CateEstimate(-3.0, 0.0, None), cfg)) == 10.0


def test_decision_config():
    assert DecisionConfig().dose_gap == 10.0
    with pytest.raises(ValueError):
        DecisionConfig(dose_low=20.0, dose_high=10.0)


def test_act_without_model_uses_prior():
    cfg = McmcConfig(chains=2, draws=500)
    dose, cate, s = act(AgentPrior(), None, 80.0, mcmc=cfg, seed=0)
    assert float(dose) == 20.0 and cate.mean == pytest.approx(10.0, abs=0.2)
    assert s.diagnostics["sampler"] == "prior"
    dose, cate, _ = act(AgentPrior().with_mean("n_e", 0.0), None, 80.0, mcmc=cfg, seed=0)
    assert float(dose) == 10.0 and abs(cate.mean) < 0.2


def test_act_with_model_correct_agent(fast_mcmc):
    model = SlopeOnlyLinearModel(0.19731, 1000)
    dose, cate, s = act(AgentPrior(), model, 80.0, mcmc=fast_mcmc, seed=2)
    assert float(dose) == 20.0
    assert cate.mean == pytest.approx(10.0, abs=1.0)
    assert s.diagnostics["sampler"] == "nuts"


def test_act_reproducible(fast_mcmc):
    model = SlopeOnlyLinearModel(0.19731, 1000)
    a = act(AgentPrior(), model, 80.0, mcmc=fast_mcmc, seed=4)[1].mean
    b = act(AgentPrior(), model, 80.0, mcmc=fast_mcmc, seed=4)[1].mean
    assert a == b
