"""Log densities of the agent's belief model.

``log_joint`` is the full joint over hyperparameters and auxiliary
variables. The samplers do not target it directly: the prediction enters
through a Gaussian likelihood with a tiny noise (1e-3), which confines the
posterior to a thin shell that gradient samplers cross very slowly. The
slope ``phi`` is affine in the treatment effect ``n_e`` and in one block of
plate noise (``s_y`` for the collapsed plate, the outcome noises for the
explicit plate), and both have Gaussian priors. Those variables are
therefore integrated out analytically (:class:`CollapsedTarget`,
:class:`ExplicitPlateTarget`), the rest is sampled, and the integrated
block is restored exactly from its Gaussian conditional in
``complete``. The joint draws have the same law as draws from
``exp(log_joint)``.
"""
import math

import numpy as np
from scipy.special import gammaln, log_ndtr

from ..plate import AuxDraw, compose_phi
from .prior import LOG_2PI, SIGMA_NAMES, AgentPrior, LatentState, Observation, normal_logpdf

DEFAULT_PRED_NOISE = 1e-3


def chi2_logpdf(z, k):
    if z <= 0:
        return -math.inf
    return (0.5 * k - 1.0) * math.log(z) - 0.5 * z - 0.5 * k * math.log(2.0) - float(gammaln(0.5 * k))


def log_joint(prior: AgentPrior, state: LatentState, obs: Observation,
              scm_constants=(12.0, -0.1, 0.125), n=1000,
              pred_noise=DEFAULT_PRED_NOISE):
    """Unnormalised log posterior of one latent state (normalised terms).

    Returns ``-inf`` for states outside the support (negative sigma or
    non-positive chi-square auxiliary) rather than raising.
    """
    if not pred_noise > 0:
        raise ValueError("pred_noise must be > 0")
    lp = 0.0
    for name in ("alpha_x_mu", "alpha_x_sigma", "alpha_a_mu", "alpha_a_sigma",
                 "alpha_y_mu", "alpha_y_sigma", "n_e"):
        lp += prior.log_density(name, getattr(state, name))
    if lp == -math.inf:
        return -math.inf
    aux = state.aux
    sd = math.sqrt(n)
    for v in (aux.s_x, aux.s_y, aux.s_a):
        lp += normal_logpdf(v, 0.0, sd)
    for v in (aux.z_xx, aux.u_xy, aux.v_xy, aux.u_xa, aux.v_xa):
        lp += chi2_logpdf(v, n - 1.0)
    if lp == -math.inf:
        return -math.inf
    xm, xs = state.alpha_x_mu, state.alpha_x_sigma
    if obs.x_new is not None or obs.x_batch:
        if xs <= 0:
            return -math.inf
        if obs.x_new is not None:
            lp += normal_logpdf(obs.x_new, xm, xs)
        for x in obs.x_batch:
            lp += normal_logpdf(x, xm, xs)
    if obs.pred is not None:
        phi = compose_phi(state.plate_params(scm_constants, n), aux)
        lp += normal_logpdf(obs.pred, phi * obs.x_new, pred_noise)
    return lp


class _Layout:
    """Affine / log-affine map between unconstrained and natural coordinates.

    Coordinate i is ``loc + scale * q`` (affine) or ``exp(loc + scale * q)``
    (log). The scales are set from the prior so that the unconstrained
    prior has roughly unit scale in every direction.
    """

    def __init__(self, loc, scale, is_log):
        self.loc = np.asarray(loc, float)
        self.scale = np.asarray(scale, float)
        self.is_log = np.asarray(is_log, bool)
        self._log_scale_sum = float(np.sum(np.log(self.scale)))

    def to_natural(self, q):
        u = self.loc + self.scale * q
        return np.where(self.is_log, np.exp(np.where(self.is_log, u, 0.0)), u)

    def to_unconstrained(self, v):
        v = np.asarray(v, float)
        with np.errstate(divide="ignore", invalid="ignore"):
            u = np.where(self.is_log, np.log(np.where(self.is_log, v, 1.0)), v)
        return (u - self.loc) / self.scale

    def log_jacobian(self, q):
        return self._log_scale_sum + float(np.sum(np.where(self.is_log, self.loc + self.scale * q, 0.0)))

    def chain(self, v, grad_natural):
        """Gradient wrt q of (natural log density + log Jacobian)."""
        dv = np.where(self.is_log, self.scale * v, self.scale)
        return grad_natural * dv + np.where(self.is_log, self.scale, 0.0)


class _Target:
    """Shared machinery: unconstrained log density and gradient."""

    dim: int
    layout: _Layout

    def natural_logp_grad(self, v):
        raise NotImplementedError

    def logp_grad(self, q):
        v = self.layout.to_natural(q)
        lp, g = self.natural_logp_grad(v)
        if not math.isfinite(lp):
            return -math.inf, np.zeros_like(q)
        return lp + self.layout.log_jacobian(q), self.layout.chain(v, g)

    def logp(self, q):
        return self.logp_grad(q)[0]


def _sigma_coords(prior, name):
    mean, std = getattr(prior, name)
    # log-scale location/scale from the prior's mode and relative width
    m = max(mean, std)
    return math.log(m), min(std / m, 1.0)


class CollapsedTarget(_Target):
    """Sufficient-statistics model with (n_e, s_y) integrated out.

    Sampled coordinates (natural scale), in order::

        alpha_x_mu, alpha_x_sigma, alpha_a_mu, alpha_a_sigma, alpha_y_mu,
        alpha_y_sigma, s_x, s_a, z_xx, u_xy, v_xy, u_xa, v_xa
    """

    OUTER = ("alpha_x_mu", "alpha_x_sigma", "alpha_a_mu", "alpha_a_sigma",
             "alpha_y_mu", "alpha_y_sigma", "s_x", "s_a", "z_xx", "u_xy",
             "v_xy", "u_xa", "v_xa")

    def __init__(self, prior: AgentPrior, obs: Observation, scm_constants=(12.0, -0.1, 0.125),
                 n=1000, pred_noise=DEFAULT_PRED_NOISE):
        if n < 2:
            raise ValueError("plate size must be >= 2")
        if not pred_noise > 0:
            raise ValueError("pred_noise must be > 0")
        self.prior, self.obs, self.n = prior, obs, int(n)
        self.a, self.b, self.d = (float(c) for c in scm_constants)
        self.pred_noise = float(pred_noise)
        self.k = self.n - 1.0
        self.dim = len(self.OUTER)
        loc, scale, is_log = [], [], []
        for name in self.OUTER[:6]:
            if name in SIGMA_NAMES:
                lo, sc = _sigma_coords(prior, name)
                loc.append(lo), scale.append(sc), is_log.append(True)
            else:
                loc.append(prior.mean(name)), scale.append(prior.std(name)), is_log.append(False)
        for _ in range(2):
            loc.append(0.0), scale.append(math.sqrt(self.n)), is_log.append(False)
        for _ in range(5):
            loc.append(math.log(self.k)), scale.append(math.sqrt(2.0 / self.k)), is_log.append(True)
        self.layout = _Layout(loc, scale, is_log)
        xb = np.asarray(obs.x_batch, float)
        self._nb = len(xb)
        self._sum_xb = float(np.sum(xb))
        self._sum_xb2 = float(np.sum(xb * xb))
        self._prior_pairs = [prior.alpha_x_mu, prior.alpha_x_sigma, prior.alpha_a_mu,
                             prior.alpha_a_sigma, prior.alpha_y_mu, prior.alpha_y_sigma]

    # -- slope coefficients -------------------------------------------------
    def coefficients(self, v, with_grad=False):
        """phi = c0 + c_e * n_e + c_y * s_y as a function of the outer state."""
        n, a, b, d = self.n, self.a, self.b, self.d
        xm, xs, am, as_, ym, ys, sx, sa, zxx, uxy, vxy, uxa, vxa = (float(t) for t in v)
        s7 = zxx + sx * sx / n
        D = n * xm * xm + 2.0 * xm * xs * sx + xs * xs * s7
        s9 = sx * sa / n + 0.5 * (uxa - vxa)
        T5 = n * xm * am + xm * as_ * sa + am * xs * sx + xs * as_ * s9
        W = 0.5 * (uxy - vxy)
        N0 = a * (n * xm + xs * sx) + n * xm * ym + ym * xs * sx + xs * ys * W
        Lb = xm + xs * sx / n
        L = ys * Lb
        c0 = b + N0 / D
        ce = d + T5 / D
        cy = L / D
        if not with_grad:
            return c0, ce, cy, D
        dD = np.zeros(13)
        dD[0] = 2.0 * n * xm + 2.0 * xs * sx
        dD[1] = 2.0 * xm * sx + 2.0 * xs * s7
        dD[6] = 2.0 * xm * xs + xs * xs * 2.0 * sx / n
        dD[8] = xs * xs
        dT = np.zeros(13)
        dT[0] = n * am + as_ * sa
        dT[1] = am * sx + as_ * s9
        dT[2] = n * xm + xs * sx
        dT[3] = xm * sa + xs * s9
        dT[6] = am * xs + xs * as_ * sa / n
        dT[7] = xm * as_ + xs * as_ * sx / n
        dT[11] = 0.5 * xs * as_
        dT[12] = -0.5 * xs * as_
        dN = np.zeros(13)
        dN[0] = a * n + n * ym
        dN[1] = a * sx + ym * sx + ys * W
        dN[4] = n * xm + xs * sx
        dN[5] = xs * W
        dN[6] = a * xs + ym * xs
        dN[9] = 0.5 * xs * ys
        dN[10] = -0.5 * xs * ys
        dL = np.zeros(13)
        dL[0] = ys
        dL[1] = ys * sx / n
        dL[5] = Lb
        dL[6] = ys * xs / n
        dc0 = (dN - (N0 / D) * dD) / D
        dce = (dT - (T5 / D) * dD) / D
        dcy = (dL - cy * dD) / D
        return c0, ce, cy, D, dc0, dce, dcy

    def inner_prior(self):
        """Means and variances of the integrated block (n_e, s_y)."""
        mu_e, sd_e = self.prior.n_e
        return np.array([mu_e, 0.0]), np.array([sd_e * sd_e, float(self.n)])

    # -- log density --------------------------------------------------------
    def natural_logp_grad(self, v):
        n, k = self.n, self.k
        g = np.zeros(13)
        lp = 0.0
        for i, (mean, std) in enumerate(self._prior_pairs):
            z = (v[i] - mean) / std
            lp -= 0.5 * z * z
            g[i] = -z / std
        if v[1] <= 0 or v[3] <= 0 or v[5] <= 0:
            return -math.inf, g
        lp -= 0.5 * (v[6] * v[6] + v[7] * v[7]) / n
        g[6] = -v[6] / n
        g[7] = -v[7] / n
        chi = v[8:13]
        if np.any(chi <= 0):
            return -math.inf, g
        lp += float(np.sum((0.5 * k - 1.0) * np.log(chi) - 0.5 * chi))
        g[8:13] = (0.5 * k - 1.0) / chi - 0.5
        xm, xs = float(v[0]), float(v[1])
        obs = self.obs
        if obs.x_new is not None:
            r = obs.x_new - xm
            lp += -math.log(xs) - 0.5 * r * r / (xs * xs)
            g[0] += r / (xs * xs)
            g[1] += -1.0 / xs + r * r / xs ** 3
        if self._nb:
            ss = self._sum_xb2 - 2.0 * xm * self._sum_xb + self._nb * xm * xm
            lp += -self._nb * math.log(xs) - 0.5 * ss / (xs * xs)
            g[0] += (self._sum_xb - self._nb * xm) / (xs * xs)
            g[1] += -self._nb / xs + ss / xs ** 3
        if obs.pred is not None:
            c0, ce, cy, D, dc0, dce, dcy = self.coefficients(v, with_grad=True)
            if not D > 0:
                return -math.inf, g
            x = obs.x_new
            mu_e, sd_e = self.prior.n_e
            ve = sd_e * sd_e
            m = x * (c0 + ce * mu_e)
            var = x * x * (ce * ce * ve + cy * cy * n) + self.pred_noise ** 2
            r = obs.pred - m
            lp += -0.5 * math.log(var) - 0.5 * r * r / var
            gm = r / var
            gv = -0.5 / var + 0.5 * r * r / (var * var)
            g += gm * x * (dc0 + mu_e * dce) + gv * x * x * (2.0 * ce * ve * dce + 2.0 * cy * n * dcy)
        return lp, g

    # -- initial points and completion -------------------------------------
    def draw_prior(self, rng):
        """A natural-scale outer state drawn from the prior."""
        h = self.prior.draw(rng)
        sx, sa = rng.normal(0.0, math.sqrt(self.n), 2)
        chi = rng.chisquare(self.k, 5)
        return np.array([h["alpha_x_mu"], h["alpha_x_sigma"], h["alpha_a_mu"],
                         h["alpha_a_sigma"], h["alpha_y_mu"], h["alpha_y_sigma"],
                         sx, sa, *chi])

    def complete(self, q, rng):
        """Natural outer state plus an exact conditional draw of (n_e, s_y).

        Returns the 15 values in ``STATE_NAMES`` order.
        """
        v = self.layout.to_natural(q)
        mean0, var0 = self.inner_prior()
        theta0 = mean0 + np.sqrt(var0) * rng.standard_normal(2)
        obs = self.obs
        if obs.pred is not None:
            c0, ce, cy, _ = self.coefficients(v)
            x = obs.x_new
            gvec = x * np.array([ce, cy])
            noise0 = self.pred_noise * rng.standard_normal()
            y0 = x * c0 + gvec @ theta0 + noise0
            s = var0 * gvec
            tot = gvec @ s + self.pred_noise ** 2
            theta0 = theta0 + s * (obs.pred - y0) / tot
        n_e, s_y = theta0
        xm, xs, am, as_, ym, ys, sx, sa, zxx, uxy, vxy, uxa, vxa = v
        return np.array([xm, xs, am, as_, ym, ys, n_e, sx, s_y, sa, zxx, uxy, vxy, uxa, vxa])

    def marginal_log_likelihood(self, v):
        """log p(pred | outer state) with (n_e, s_y) integrated out (normalised)."""
        c0, ce, cy, _ = self.coefficients(v)
        x = self.obs.x_new
        mu_e, sd_e = self.prior.n_e
        m = x * (c0 + ce * mu_e)
        var = x * x * (ce * ce * sd_e * sd_e + cy * cy * self.n) + self.pred_noise ** 2
        return normal_logpdf(self.obs.pred, m, math.sqrt(var))

    state_names = ("alpha_x_mu", "alpha_x_sigma", "alpha_a_mu", "alpha_a_sigma",
                   "alpha_y_mu", "alpha_y_sigma", "n_e", "s_x", "s_y", "s_a", "z_xx",
                   "u_xy", "v_xy", "u_xa", "v_xa")


class ExplicitPlateTarget(_Target):
    """The same belief model with the n plate rows kept as latent normals.

    Sampled coordinates: six hyperparameters, then ``eps_x`` (n) and
    ``eps_a`` (n). ``n_e`` and ``eps_y`` (n) are integrated out exactly as in
    :class:`CollapsedTarget`. Only practical for small plates; it exists to
    check the collapsed formulation.
    """

    def __init__(self, prior: AgentPrior, obs: Observation, scm_constants=(12.0, -0.1, 0.125),
                 n=10, pred_noise=DEFAULT_PRED_NOISE):
        self.prior, self.obs, self.n = prior, obs, int(n)
        self.a, self.b, self.d = (float(c) for c in scm_constants)
        self.pred_noise = float(pred_noise)
        self.dim = 6 + 2 * self.n
        loc, scale, is_log = [], [], []
        for name in CollapsedTarget.OUTER[:6]:
            if name in SIGMA_NAMES:
                lo, sc = _sigma_coords(prior, name)
                loc.append(lo), scale.append(sc), is_log.append(True)
            else:
                loc.append(prior.mean(name)), scale.append(prior.std(name)), is_log.append(False)
        loc += [0.0] * (2 * self.n)
        scale += [1.0] * (2 * self.n)
        is_log += [False] * (2 * self.n)
        self.layout = _Layout(loc, scale, is_log)
        xb = np.asarray(obs.x_batch, float)
        self._nb, self._sum_xb, self._sum_xb2 = len(xb), float(np.sum(xb)), float(np.sum(xb * xb))
        self._prior_pairs = [prior.alpha_x_mu, prior.alpha_x_sigma, prior.alpha_a_mu,
                             prior.alpha_a_sigma, prior.alpha_y_mu, prior.alpha_y_sigma]

    def _rows(self, v):
        n = self.n
        xm, xs, am, as_ = v[0], v[1], v[2], v[3]
        ex, ea = v[6:6 + n], v[6 + n:]
        X = xm + xs * ex
        A = self.d * X + am + as_ * ea
        return X, A, ex, ea

    def coefficients(self, v):
        X, A, _, _ = self._rows(v)
        ym, ys = v[4], v[5]
        Q = float(X @ X)
        SX = float(np.sum(X))
        P = float(X @ A)
        R0 = (self.a + ym) * SX + self.b * Q
        return R0 / Q, P / Q, ys * X / Q, Q

    def natural_logp_grad(self, v):
        n = self.n
        g = np.zeros(self.dim)
        lp = 0.0
        for i, (mean, std) in enumerate(self._prior_pairs):
            z = (v[i] - mean) / std
            lp -= 0.5 * z * z
            g[i] = -z / std
        if v[1] <= 0 or v[3] <= 0 or v[5] <= 0:
            return -math.inf, g
        eps = v[6:]
        lp -= 0.5 * float(eps @ eps)
        g[6:] = -eps
        xm, xs = float(v[0]), float(v[1])
        obs = self.obs
        if obs.x_new is not None:
            r = obs.x_new - xm
            lp += -math.log(xs) - 0.5 * r * r / (xs * xs)
            g[0] += r / (xs * xs)
            g[1] += -1.0 / xs + r * r / xs ** 3
        if self._nb:
            ss = self._sum_xb2 - 2.0 * xm * self._sum_xb + self._nb * xm * xm
            lp += -self._nb * math.log(xs) - 0.5 * ss / (xs * xs)
            g[0] += (self._sum_xb - self._nb * xm) / (xs * xs)
            g[1] += -self._nb / xs + ss / xs ** 3
        if obs.pred is not None:
            X, A, ex, ea = self._rows(v)
            ym, ys, as_ = float(v[4]), float(v[5]), float(v[3])
            Q = float(X @ X)
            if not Q > 0:
                return -math.inf, g
            SX = float(np.sum(X))
            P = float(X @ A)
            R0 = (self.a + ym) * SX + self.b * Q
            c0, ce, cysq = R0 / Q, P / Q, ys * ys / Q
            x = obs.x_new
            mu_e, sd_e = self.prior.n_e
            ve = sd_e * sd_e
            m = x * (c0 + ce * mu_e)
            var = x * x * (ce * ce * ve + cysq) + self.pred_noise ** 2
            r = obs.pred - m
            lp += -0.5 * math.log(var) - 0.5 * r * r / var
            gm = r / var
            gv = -0.5 / var + 0.5 * r * r / (var * var)
            G0 = gm * x
            GE = gm * x * mu_e + gv * x * x * 2.0 * ce * ve
            GY = gv * x * x
            gR0 = G0 / Q
            gP = GE / Q
            gQ = -(G0 * c0 + GE * ce) / Q - GY * ys * ys / (Q * Q)
            gX = gR0 * ((self.a + ym) + 2.0 * self.b * X) + gQ * 2.0 * X + gP * (A + self.d * X)
            gA = gP * X
            g[0] += float(np.sum(gX))
            g[1] += float(gX @ ex)
            g[2] += float(np.sum(gA))
            g[3] += float(gA @ ea)
            g[4] += gR0 * SX
            g[5] += GY * 2.0 * ys / Q
            g[6:6 + n] += xs * gX
            g[6 + n:] += as_ * gA
        return lp, g

    def draw_prior(self, rng):
        h = self.prior.draw(rng)
        eps = rng.standard_normal(2 * self.n)
        return np.concatenate([[h["alpha_x_mu"], h["alpha_x_sigma"], h["alpha_a_mu"],
                                h["alpha_a_sigma"], h["alpha_y_mu"], h["alpha_y_sigma"]], eps])

    def complete(self, q, rng):
        """Hyperparameters plus an exact conditional draw of n_e (7 values)."""
        v = self.layout.to_natural(q)
        mu_e, sd_e = self.prior.n_e
        n_e = mu_e + sd_e * rng.standard_normal()
        obs = self.obs
        if obs.pred is not None:
            c0, ce, cyv, _ = self.coefficients(v)
            x = obs.x_new
            ey = rng.standard_normal(self.n)
            noise0 = self.pred_noise * rng.standard_normal()
            y0 = x * c0 + x * ce * n_e + x * float(cyv @ ey) + noise0
            tot = x * x * (ce * ce * sd_e * sd_e + float(cyv @ cyv)) + self.pred_noise ** 2
            n_e = n_e + sd_e * sd_e * x * ce * (obs.pred - y0) / tot
        return np.concatenate([v[:6], [n_e]])

    state_names = ("alpha_x_mu", "alpha_x_sigma", "alpha_a_mu", "alpha_a_sigma",
                   "alpha_y_mu", "alpha_y_sigma", "n_e")
