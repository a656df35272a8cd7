"""Acceptance criteria, each at its stated tolerance.

Every test records one PASS/FAIL line (shown in the terminal summary).
Expensive runs are module-scoped fixtures so the sampler-health criterion
can inspect the same runs the other criteria used.
"""
import math
import time

import numpy as np
import pytest
from scipy.stats import ks_2samp

from acceptance_log import record
from two_step_agent.decision import act, estimate_cate
from two_step_agent.experiments import WITH_DS, WITHOUT_DS, SweepConfig, emit_figure_data, grid_means, run_sweep
from two_step_agent.experiments.sanity import EX2_CONSTANTS, EX2_PRIOR, example2_observation
from two_step_agent.inference import (STATE_NAMES, AgentPrior, McmcConfig, Observation, posterior_corr,
                                      sample_posterior, sample_prior)
from two_step_agent.plate import HYPER_NAMES, PlateParams, compose_phi, compose_stats, explicit_plate_phi, sample_aux
from two_step_agent.predictor import fit_ols_no_intercept
from two_step_agent.scm import LinearGaussianScm, sample_historical

SEED = 20240
MCMC = McmcConfig()          # 4 chains x (1000 warmup + 1000 draws)
TRUE_CATE = 10.0
RHAT_MAX = 1.05
ACCEPT_TARGET, ACCEPT_BAND = 0.85, 0.10

# runs whose diagnostics feed the sampler-health criterion
HEALTH = {}


def _note_samples(label, samples):
    HEALTH.setdefault("samples", []).append((label, samples.rhat_max,
                                             float(np.mean(samples.diagnostics.get("acceptance", [1.0]))),
                                             samples.diagnostics.get("sampler")))


def _model():
    return fit_ols_no_intercept(sample_historical(LinearGaussianScm(), 1000, SEED))


# -- 1 -----------------------------------------------------------------------

def test_c01_ols_consistency():
    t0 = time.perf_counter()
    phi = fit_ols_no_intercept(sample_historical(LinearGaussianScm(), 100_000, SEED)).phi
    dt = time.perf_counter() - t0
    ok = abs(phi - 0.19731) <= 0.005 and dt < 5
    record("C1 OLS consistency", ok, f"phi={phi:.5f} (target 0.19731 +- 0.005), {dt:.2f}s")
    assert ok


# -- 2 -----------------------------------------------------------------------

def test_c02_plate_collapse_equivalence():
    t0 = time.perf_counter()
    phi_ks = {}
    for n in (5, 50, 1000):
        p = PlateParams(n=n)
        collapsed = compose_phi(p, sample_aux(n, SEED + n, size=2000))
        g = np.random.default_rng([SEED, n])
        explicit = np.array([explicit_plate_phi(p, g) for _ in range(2000)])
        phi_ks[n] = float(ks_2samp(collapsed, explicit).statistic)
    obs = Observation(x_new=80.0, pred=0.19731 * 80.0)
    post_ks = {}
    for n in (10, 100):
        col = sample_posterior(AgentPrior(), obs, MCMC, seed=SEED + n, n=n)
        exp = sample_posterior(AgentPrior(), obs, MCMC, seed=SEED + 2 * n, n=n, formulation="explicit")
        _note_samples(f"C2 collapsed n={n}", col)
        _note_samples(f"C2 explicit n={n}", exp)
        post_ks[n] = max(float(ks_2samp(col.pooled(k), exp.pooled(k)).statistic) for k in HYPER_NAMES)
    dt = time.perf_counter() - t0
    ok = max(phi_ks.values()) <= 0.05 and max(post_ks.values()) <= 0.08 and dt < 600
    record("C2 plate-collapse equivalence", ok,
           f"phi KS {', '.join(f'n={k}: {v:.4f}' for k, v in phi_ks.items())} (<=0.05); "
           f"posterior max KS {', '.join(f'n={k}: {v:.4f}' for k, v in post_ks.items())} (<=0.08); {dt:.0f}s")
    assert ok


# -- 3 -----------------------------------------------------------------------

def test_c03_update_direction():
    t0 = time.perf_counter()
    s = sample_posterior(AgentPrior(), Observation(x_new=200.0), MCMC, seed=SEED + 3)
    dt = time.perf_counter() - t0
    _note_samples("C3 x_new=200", s)
    m, se = s.mean("alpha_x_mu"), s.mcse("alpha_x_mu")
    ok = m > 80.0 and (m - 80.0) >= 3 * se and dt < 60
    record("C3 update direction", ok, f"posterior mean {m:.4f} = 80 + {(m - 80) / se:.1f} MCSE (>=3); {dt:.1f}s")
    assert ok


# -- 4 -----------------------------------------------------------------------

def test_c04_convergence():
    t0 = time.perf_counter()
    batch = np.random.default_rng(SEED + 4).normal(80.0, 10.0, 1000)
    prior = AgentPrior(alpha_x_mu=(70.0, 5.0))
    s = sample_posterior(prior, Observation(x_batch=batch), MCMC, seed=SEED + 4)
    dt = time.perf_counter() - t0
    _note_samples("C4 batch of 1000", s)
    m = s.mean("alpha_x_mu")
    ok = abs(m - 80.0) <= 1.0 and dt < 120
    record("C4 convergence", ok, f"posterior mean {m:.3f} (80 +- 1), batch mean {batch.mean():.3f}; {dt:.1f}s")
    assert ok


# -- 5 -----------------------------------------------------------------------

def test_c05_correlation_emergence():
    t0 = time.perf_counter()
    s = sample_posterior(EX2_PRIOR, example2_observation(), MCMC, seed=SEED + 5, scm_constants=EX2_CONSTANTS)
    dt = time.perf_counter() - t0
    _note_samples("C5 motivating example 2", s)
    r = posterior_corr(s, "n_e", "alpha_a_mu")
    ok = r <= -0.3 and dt < 60
    record("C5 correlation emergence", ok, f"corr(N_E, alpha_A_mu) = {r:.3f} (<= -0.3); {dt:.1f}s")
    assert ok


# -- 6 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def example1_runs():
    model = _model()
    t0 = time.perf_counter()
    out = {}
    for centre in (0.0, 20.0):
        prior = AgentPrior().with_mean("alpha_a_mu", centre)
        out[centre] = []
        for k in range(8):
            dose, cate, s = act(prior, model, 80.0, seed=SEED + 100 * k + int(centre), mcmc=MCMC)
            _note_samples(f"C6 mu_A={centre} seed {k}", s)
            out[centre].append((float(dose), cate.mean, not s.converged))
    return out, time.perf_counter() - t0


def test_c06_motivating_example_1(example1_runs):
    out, dt = example1_runs
    doses0 = [d for d, _, _ in out[0.0]]
    doses20 = [d for d, _, _ in out[20.0]]
    ok = all(d == 20.0 for d in doses0) and all(d == 10.0 for d in doses20) and dt < 120
    cm0 = np.mean([c for _, c, _ in out[0.0]])
    cm20 = np.mean([c for _, c, _ in out[20.0]])
    record("C6 motivating example 1", ok,
           f"mu_A=0: doses {sorted(set(doses0))} (CATE {cm0:.2f}); mu_A=20: doses {sorted(set(doses20))} "
           f"(CATE {cm20:.2f}); 8 seeds; {dt:.0f}s")
    assert ok


# -- 7 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def n_e_sweep():
    cfg = SweepConfig(varied_param="n_e", grid=(0.0, 0.5, 1.0, 1.5, 2.0), replicates=8, mcmc=MCMC)
    t0 = time.perf_counter()
    recs = run_sweep(cfg, seed=SEED + 7)
    return recs, time.perf_counter() - t0


def test_c07i_gray_band(n_e_sweep):
    recs, dt = n_e_sweep
    rows = []
    ok = dt < 1200
    for gv in sorted({r.grid_value for r in recs}):
        w = [r for r in recs if r.grid_value == gv and r.arm == WITH_DS]
        cm = np.mean([r.cate_mean for r in w])
        cs = np.mean([r.cate_std for r in w])
        inside = abs(TRUE_CATE - cm) <= cs
        ok = ok and inside
        rows.append(f"{gv:g}: {cm:.2f}+-{cs:.2f}{'' if inside else ' OUT'}")
    record("C7(i) gray band at every N_E grid point", ok, "; ".join(rows) + f"; {dt:.0f}s")
    assert ok


def test_c07ii_outcomes_with_support(n_e_sweep):
    recs, dt = n_e_sweep
    yw = grid_means(recs, WITH_DS)
    ywo = grid_means(recs, WITHOUT_DS)
    dose_wo = grid_means(recs, WITHOUT_DS, "dose")
    ok = dt < 1200
    rows = []
    for gv in sorted(yw):
        wrong_prior = dose_wo[gv] < 20.0     # prior alone picks the low dose at least once
        good = yw[gv] >= ywo[gv] and (yw[gv] > ywo[gv] if wrong_prior else True)
        ok = ok and good
        rows.append(f"{gv:g}: {yw[gv]:.2f} vs {ywo[gv]:.2f}{' (prior wrong)' if wrong_prior else ''}")
    record("C7(ii) mean Y with DS >= without DS", ok, "; ".join(rows))
    assert ok


# -- 8 -----------------------------------------------------------------------

@pytest.fixture(scope="module")
def alpha_a_sweep():
    cfg = SweepConfig(varied_param="alpha_a_mu", grid=(-9.0, -6.0, -3.0, 0.0, 3.0, 6.0, 9.0),
                      grid_mode="offset", replicates=8, mcmc=MCMC)
    t0 = time.perf_counter()
    recs = run_sweep(cfg, seed=SEED + 8)
    return recs, time.perf_counter() - t0


def test_c08_harm_from_decision_support(alpha_a_sweep):
    recs, dt = alpha_a_sweep
    yw = grid_means(recs, WITH_DS)
    ywo = grid_means(recs, WITHOUT_DS)
    cate = grid_means(recs, WITH_DS, "cate_mean")
    diffs = {gv: yw[gv] - ywo[gv] for gv in yw}
    ok = any(d <= -1.0 for d in diffs.values()) and dt < 1500
    record("C8 harm from decision support (some offset with Y drop >= 1)", ok,
           "; ".join(f"{gv:+g}: dY={diffs[gv]:+.2f} CATE={cate[gv]:.2f}" for gv in sorted(diffs))
           + f"; {dt:.0f}s")
    assert ok


# -- 9 -----------------------------------------------------------------------

def test_c09_sampler_health(example1_runs, n_e_sweep, alpha_a_sweep):
    runs = HEALTH.get("samples", [])
    nuts = [r for r in runs if r[3] == "nuts"]
    sweep_recs = n_e_sweep[0] + alpha_a_sweep[0]
    rhats = [r[1] for r in runs] + [r.rhat_max for r in sweep_recs]
    accept = [r[2] for r in nuts]
    flagged = sum(r.flagged for r in sweep_recs) + sum(f for v in example1_runs[0].values() for _, _, f in v)
    worst_rhat = max(rhats)
    acc_lo, acc_hi = min(accept), max(accept)
    ok = (worst_rhat <= RHAT_MAX and abs(acc_lo - ACCEPT_TARGET) <= ACCEPT_BAND
          and abs(acc_hi - ACCEPT_TARGET) <= ACCEPT_BAND and flagged == 0)
    record("C9 sampler health", ok,
           f"max R-hat {worst_rhat:.4f} over {len(rhats)} runs (<=1.05); NUTS acceptance "
           f"{acc_lo:.3f}..{acc_hi:.3f} (0.85 +- 0.10); flagged records {flagged}")
    assert ok


# -- 10 ----------------------------------------------------------------------

def test_c10_property_suites(tmp_path):
    results = {}
    # prior recovery with nothing observed
    prior = AgentPrior()
    post = sample_posterior(prior, Observation(), McmcConfig(chains=4, warmup=500, draws=1000), seed=SEED + 10)
    ref = sample_prior(prior, McmcConfig(chains=4, draws=1000), seed=SEED + 11)
    worst = max(ks_2samp(post.pooled(k), ref.pooled(k)).statistic for k in STATE_NAMES)
    results["prior recovery"] = worst < 0.06
    # CATE shortcut: high-minus-low equals N_E times the dose gap, draw by draw
    cate = estimate_cate(post, 80.0)
    results["CATE shortcut"] = bool(np.allclose(cate.per_draw, 10.0 * post.pooled("n_e"), atol=1e-9, rtol=0))
    # Monte Carlo identities for the sum of squares and cross products
    n = 1000
    aux = sample_aux(n, SEED + 12, size=100_000)
    st = compose_stats(PlateParams(n=n), aux)
    se7 = np.std(st.s7) / math.sqrt(len(st.s7))
    prod = aux.s_x * aux.s_y
    cov = np.cov(st.s8, prod)[0, 1]
    se_cov = np.std((st.s8 - st.s8.mean()) * (prod - prod.mean())) / math.sqrt(len(prod))
    results["s7/s8 identities"] = (abs(st.s7.mean() - n) < 3 * se7 and abs(st.s8.mean()) < 3 * math.sqrt(n / len(prod))
                                   and abs(np.var(st.s8) / n - 1) < 0.03 and abs(cov - n) < 3 * se_cov)
    # byte-reproducible sweeps
    cfg = SweepConfig(grid=(0.5, 1.0), replicates=2, mcmc=McmcConfig(chains=2, warmup=200, draws=200))
    emit_figure_data(run_sweep(cfg, seed=SEED), tmp_path / "a")
    emit_figure_data(run_sweep(cfg, seed=SEED), tmp_path / "b")
    results["sweep byte-reproducibility"] = all(
        (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()
        for f in ("sweep_records.csv", "sweep_summary.json"))
    ok = all(results.values())
    record("C10 property suites", ok, "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in results.items()))
    assert ok
