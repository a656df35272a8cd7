"""Posterior sampling for the agent's belief update, plus chain diagnostics."""
import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .. import rng as _rng
from ..errors import DiagnosticUnavailableError, InitializationError, UndefinedCorrelationError
from ..plate import AUX_NAMES, HYPER_NAMES
from .density import DEFAULT_PRED_NOISE, CollapsedTarget, ExplicitPlateTarget
from .nuts import NUTS
from .prior import STATE_NAMES, AgentPrior, LatentState, Observation


@dataclass(frozen=True)
class McmcConfig:
    chains: int = 4
    warmup: int = 1000
    draws: int = 1000
    target_accept: float = 0.85
    max_tree_depth: int = 10
    pred_noise: float = DEFAULT_PRED_NOISE
    rhat_gate: float = 1.1

    def __post_init__(self):
        if self.chains < 1 or self.draws < 1 or self.warmup < 0:
            raise ValueError("need chains >= 1, draws >= 1 and warmup >= 0")
        if not 0 < self.target_accept < 1:
            raise ValueError("target_accept must lie in (0, 1)")
        if not self.pred_noise > 0:
            raise ValueError("pred_noise must be > 0")

    def to_dict(self):
        return asdict(self)


@dataclass
class PosteriorSamples:
    """Draws of the latent state, shaped ``(chains, draws, params)``.

    ``diagnostics`` holds ``rhat`` (param -> split R-hat), ``acceptance``
    (per chain), ``divergences`` (total after warmup) and ``converged``.
    For prior draws the sampler entry is ``"prior"`` and acceptance is 1.
    """

    names: tuple
    values: np.ndarray
    warmup_count: int
    draw_count: int
    diagnostics: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.values.ndim != 3 or self.values.shape[2] != len(self.names):
            raise ValueError("values must have shape (chains, draws, len(names))")
        if self.values.shape[1] < 1:
            raise ValueError("draw_count must be >= 1")

    @property
    def n_chains(self):
        return self.values.shape[0]

    @property
    def chains(self):
        """Per-chain lists of :class:`LatentState` (only for full states)."""
        if tuple(self.names) != STATE_NAMES:
            raise AttributeError("full latent states are not available for this formulation")
        return [[LatentState.from_array(row) for row in chain] for chain in self.values]

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise KeyError(f"unknown parameter {name!r}; have {self.names}") from None

    def param(self, name):
        """Array of shape (chains, draws) for one parameter."""
        return self.values[:, :, self.index(name)]

    def pooled(self, name):
        return self.param(name).ravel()

    def mean(self, name):
        return float(np.mean(self.param(name)))

    def std(self, name):
        return float(np.std(self.param(name), ddof=1))

    def mcse(self, name):
        """Monte Carlo standard error of the posterior mean."""
        ess = effective_sample_size(self.param(name))
        return self.std(name) / math.sqrt(ess)

    @property
    def converged(self):
        return bool(self.diagnostics.get("converged", True))

    @property
    def rhat_max(self):
        vals = [v for v in self.diagnostics.get("rhat", {}).values() if v == v]
        return max(vals) if vals else float("nan")

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["chain", "draw"] + list(self.names))
            for c, chain in enumerate(self.values):
                for i, row in enumerate(chain):
                    w.writerow([c, i] + [repr(float(v)) for v in row])

    def diagnostics_json(self, path=None):
        payload = {
            "sampler": self.diagnostics.get("sampler"),
            "chains": self.n_chains,
            "warmup": self.warmup_count,
            "draws": self.draw_count,
            "rhat": self.diagnostics.get("rhat", {}),
            "acceptance": self.diagnostics.get("acceptance", []),
            "divergences": self.diagnostics.get("divergences", 0),
            "step_size": self.diagnostics.get("step_size", []),
            "converged": self.converged,
        }
        text = json.dumps(_jsonable(payload), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def _make_target(prior, obs, scm_constants, n, pred_noise, formulation):
    if formulation == "collapsed":
        return CollapsedTarget(prior, obs, scm_constants, n=n, pred_noise=pred_noise)
    if formulation == "explicit":
        return ExplicitPlateTarget(prior, obs, scm_constants, n=n, pred_noise=pred_noise)
    raise ValueError(f"unknown formulation {formulation!r}")


def _initial_point(target, rng, tries=100):
    v = None
    for _ in range(tries):
        v = target.draw_prior(rng)
        q = target.layout.to_unconstrained(v)
        if np.all(np.isfinite(q)) and math.isfinite(target.logp(q)):
            return q
    raise InitializationError(f"non-finite log density at initial state {v}", state=v)


def sample_posterior(prior: AgentPrior, obs: Observation, config: McmcConfig = McmcConfig(),
                     seed=0, scm_constants=(12.0, -0.1, 0.125), n=1000,
                     formulation="collapsed") -> PosteriorSamples:
    """Posterior draws of the latent state given ``obs``.

    Each chain starts from its own prior draw and uses the random stream
    ``(seed, chain)``, so results do not depend on the order chains run in.
    ``formulation="explicit"`` keeps the n plate rows as latents and returns
    the seven hyperparameters only.
    """
    target = _make_target(prior, obs, scm_constants, n, config.pred_noise, formulation)
    out = np.empty((config.chains, config.draws, len(target.state_names)))
    acceptance, divergences, step_sizes, depths = [], [], [], []
    for c in range(config.chains):
        g = _rng.stream(seed, _rng.INFERENCE, c)
        q0 = _initial_point(target, g)
        sampler = NUTS(target.logp_grad, target.dim, g, target_accept=config.target_accept,
                       max_tree_depth=config.max_tree_depth)
        res = sampler.sample(q0, warmup=config.warmup, draws=config.draws)
        for i, q in enumerate(res.draws):
            out[c, i] = target.complete(q, g)
        acceptance.append(float(res.accept_stat.mean()))
        divergences.append(int(res.divergent.sum()))
        step_sizes.append(res.step_size)
        depths.append(float(res.tree_depth.mean()))
    samples = PosteriorSamples(tuple(target.state_names), out, config.warmup, config.draws)
    samples.diagnostics = {
        "sampler": "nuts",
        "acceptance": acceptance,
        "divergences": int(sum(divergences)),
        "divergences_per_chain": divergences,
        "step_size": step_sizes,
        "mean_tree_depth": depths,
    }
    _attach_rhat(samples, config.rhat_gate)
    return samples


def sample_prior(prior: AgentPrior, config: McmcConfig = McmcConfig(), seed=0, n=1000) -> PosteriorSamples:
    """Exact i.i.d. draws from the prior in the posterior container layout."""
    g = _rng.stream(seed, _rng.PRIOR_DRAWS)
    shape = (config.chains, config.draws)
    size = config.chains * config.draws
    h = prior.draw(g, size=size)
    cols = [np.asarray(h[k], float) for k in HYPER_NAMES]
    sd = math.sqrt(n)
    cols += [g.normal(0.0, sd, size) for _ in range(3)]
    cols += [g.chisquare(n - 1.0, size) for _ in range(5)]
    values = np.stack(cols, axis=-1).reshape(shape + (len(STATE_NAMES),))
    samples = PosteriorSamples(STATE_NAMES, values, 0, config.draws)
    samples.diagnostics = {"sampler": "prior", "acceptance": [1.0] * config.chains,
                           "divergences": 0, "step_size": []}
    _attach_rhat(samples, config.rhat_gate)
    return samples


def _attach_rhat(samples, gate):
    rhat = {}
    if samples.n_chains >= 2 and samples.draw_count >= 4:
        for name in samples.names:
            rhat[name] = split_rhat(samples, name)
    samples.diagnostics["rhat"] = rhat
    bad = [k for k, v in rhat.items() if v > gate]
    samples.diagnostics["converged"] = not bad
    samples.diagnostics["rhat_failures"] = bad


def split_rhat(samples, param=None):
    """Split-chain potential scale reduction factor.

    ``samples`` is a :class:`PosteriorSamples` (with ``param``) or an array
    of shape (chains, draws). Each chain is cut in half and the classic
    between/within variance ratio is computed over the halves. Returns
    ``nan`` when the within-chain variance is zero.
    """
    x = samples.param(param) if isinstance(samples, PosteriorSamples) else np.asarray(samples, float)
    if x.ndim != 2 or x.shape[0] < 2:
        raise DiagnosticUnavailableError("split R-hat needs at least 2 chains")
    if x.shape[1] < 4:
        raise DiagnosticUnavailableError("split R-hat needs at least 4 draws per chain")
    half = x.shape[1] // 2
    pieces = np.concatenate([x[:, :half], x[:, -half:]], axis=0)
    m, length = pieces.shape
    means = pieces.mean(axis=1)
    B = length * means.var(ddof=1)
    W = pieces.var(axis=1, ddof=1).mean()
    if W <= 0:
        return float("nan")
    var_plus = (length - 1) / length * W + B / length
    return float(math.sqrt(var_plus / W))


def _autocovariance(x):
    n = len(x)
    size = 2 ** int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(x - x.mean(), size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov


def effective_sample_size(x):
    """Multi-chain ESS with Geyer's initial monotone sequence estimator."""
    x = np.atleast_2d(np.asarray(x, float))
    m, n = x.shape
    if n < 4:
        return float(m * n)
    acov = np.array([_autocovariance(c) for c in x])
    chain_mean = x.mean(axis=1)
    chain_var = acov[:, 0] * n / (n - 1.0)
    W = chain_var.mean()
    if W <= 0:
        return float(m * n)
    var_plus = W * (n - 1.0) / n
    if m > 1:
        var_plus += chain_mean.var(ddof=1)
    rho = 1.0 - (W - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # pair sums, truncated at the first negative pair, then made monotone
    pairs = []
    t = 0
    while t + 1 < n:
        s = rho[t] + rho[t + 1]
        if s < 0:
            break
        pairs.append(s)
        t += 2
    pairs = np.minimum.accumulate(np.array(pairs)) if pairs else np.array([1.0])
    tau = -1.0 + 2.0 * pairs.sum()
    tau = max(tau, 1.0 / math.log10(m * n))
    return float(m * n / tau)


def posterior_corr(samples: PosteriorSamples, p1, p2):
    """Pearson correlation of two parameters over all pooled draws."""
    a, b = samples.pooled(p1), samples.pooled(p2)
    if np.std(a) == 0 or np.std(b) == 0:
        raise UndefinedCorrelationError(f"zero variance in {p1!r} or {p2!r}")
    return float(np.corrcoef(a, b)[0, 1])
