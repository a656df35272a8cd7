"""No-U-Turn sampler with multinomial trajectory sampling.

Follows the usual recipe: diagonal Euclidean metric, dual-averaging step
size adaptation, and a windowed warmup (fast / slow / fast) that
re-estimates the metric from the draws of each slow window.
"""
import math
from dataclasses import dataclass

import numpy as np

MAX_ENERGY_ERROR = 1000.0


@dataclass
class ChainResult:
    draws: np.ndarray          # (draws, dim) unconstrained positions
    accept_stat: np.ndarray    # (draws,)
    divergent: np.ndarray      # (draws,) bool
    tree_depth: np.ndarray     # (draws,)
    n_leapfrog: np.ndarray     # (draws,)
    step_size: float
    inv_metric: np.ndarray
    warmup_divergences: int


class _Tree:
    __slots__ = ("q_m", "p_m", "g_m", "lp_m", "q_p", "p_p", "g_p", "lp_p",
                 "ps_m", "ps_p", "rho", "log_w", "q_s", "lp_s", "g_s",
                 "n", "sum_acc", "divergent", "turning")


def _persist(ps_minus, ps_plus, rho):
    return float(ps_minus @ rho) > 0.0 and float(ps_plus @ rho) > 0.0


class NUTS:
    """One chain of NUTS over an unconstrained log density.

    ``logp_grad(q)`` must return ``(log density, gradient)``.
    """

    def __init__(self, logp_grad, dim, rng, target_accept=0.85, max_tree_depth=10,
                 inv_metric=None):
        self.logp_grad = logp_grad
        self.dim = dim
        self.rng = rng
        self.target_accept = target_accept
        self.max_tree_depth = max_tree_depth
        self.inv_metric = np.ones(dim) if inv_metric is None else np.asarray(inv_metric, float)
        self.step_size = 0.1

    # -- dynamics -----------------------------------------------------------
    def _leapfrog(self, q, p, g, eps):
        p = p + 0.5 * eps * g
        q = q + eps * self.inv_metric * p
        lp, g = self.logp_grad(q)
        p = p + 0.5 * eps * g
        return q, p, g, lp

    def _kinetic(self, p):
        return 0.5 * float(p @ (self.inv_metric * p))

    def _leaf(self, q, p, g, eps, H0):
        q, p, g, lp = self._leapfrog(q, p, g, eps)
        H = -lp + self._kinetic(p)
        if not math.isfinite(H):
            H = math.inf
        delta = H - H0
        t = _Tree()
        t.q_m = t.q_p = t.q_s = q
        t.p_m = t.p_p = t.rho = p
        t.g_m = t.g_p = t.g_s = g
        t.lp_m = t.lp_p = t.lp_s = lp
        t.ps_m = t.ps_p = self.inv_metric * p
        t.log_w = -delta
        t.n = 1
        t.sum_acc = 1.0 if delta <= 0 else math.exp(-delta)
        t.divergent = delta > MAX_ENERGY_ERROR
        t.turning = False
        return t

    def _merge(self, old, new, direction, uniform):
        """Join ``new`` onto ``old`` in ``direction``; picks the proposal.

        ``uniform`` selects multinomial sampling within a subtree; otherwise
        the new subtree's proposal is favoured (top-level progressive
        sampling).
        """
        minus, plus = (old, new) if direction > 0 else (new, old)
        t = _Tree()
        t.q_m, t.p_m, t.g_m, t.lp_m, t.ps_m = minus.q_m, minus.p_m, minus.g_m, minus.lp_m, minus.ps_m
        t.q_p, t.p_p, t.g_p, t.lp_p, t.ps_p = plus.q_p, plus.p_p, plus.g_p, plus.lp_p, plus.ps_p
        log_w = np.logaddexp(old.log_w, new.log_w)
        if uniform:
            take_new = math.log(self.rng.random()) < new.log_w - log_w
        else:
            take_new = new.log_w > old.log_w or math.log(self.rng.random()) < new.log_w - old.log_w
        src = new if take_new else old
        t.q_s, t.lp_s, t.g_s = src.q_s, src.lp_s, src.g_s
        t.log_w = float(log_w)
        t.rho = minus.rho + plus.rho
        t.n = old.n + new.n
        t.sum_acc = old.sum_acc + new.sum_acc
        t.divergent = False
        persist = _persist(minus.ps_m, plus.ps_p, t.rho)
        persist = persist and _persist(minus.ps_m, plus.ps_m, minus.rho + plus.p_m)
        persist = persist and _persist(minus.ps_p, plus.ps_p, plus.rho + minus.p_p)
        t.turning = not persist
        return t

    def _build(self, q, p, g, direction, depth, eps, H0):
        if depth == 0:
            return self._leaf(q, p, g, direction * eps, H0)
        first = self._build(q, p, g, direction, depth - 1, eps, H0)
        if first.divergent or first.turning:
            return first
        if direction > 0:
            q2, p2, g2 = first.q_p, first.p_p, first.g_p
        else:
            q2, p2, g2 = first.q_m, first.p_m, first.g_m
        second = self._build(q2, p2, g2, direction, depth - 1, eps, H0)
        if second.divergent or second.turning:
            first.n += second.n
            first.sum_acc += second.sum_acc
            first.divergent = second.divergent
            first.turning = second.turning
            return first
        return self._merge(first, second, direction, uniform=True)

    def transition(self, q, lp, g):
        eps = self.step_size
        p = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
        H0 = -lp + self._kinetic(p)
        tree = _Tree()
        tree.q_m = tree.q_p = tree.q_s = q
        tree.p_m = tree.p_p = tree.rho = p
        tree.g_m = tree.g_p = tree.g_s = g
        tree.lp_m = tree.lp_p = tree.lp_s = lp
        tree.ps_m = tree.ps_p = self.inv_metric * p
        tree.log_w = 0.0
        tree.n = 0
        tree.sum_acc = 0.0
        n_leapfrog, sum_acc, divergent, depth = 0, 0.0, False, 0
        while depth < self.max_tree_depth:
            direction = 1 if self.rng.random() < 0.5 else -1
            if direction > 0:
                sub = self._build(tree.q_p, tree.p_p, tree.g_p, 1, depth, eps, H0)
            else:
                sub = self._build(tree.q_m, tree.p_m, tree.g_m, -1, depth, eps, H0)
            n_leapfrog += sub.n
            sum_acc += sub.sum_acc
            depth += 1
            if sub.divergent:
                divergent = True
                break
            if sub.turning:
                break
            tree = self._merge(tree, sub, direction, uniform=False)
            if tree.turning:
                break
        accept = sum_acc / max(n_leapfrog, 1)
        return tree.q_s, tree.lp_s, tree.g_s, accept, divergent, depth, n_leapfrog

    # -- adaptation ---------------------------------------------------------
    def _init_step_size(self, q, lp, g):
        eps = self.step_size
        p = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
        H0 = -lp + self._kinetic(p)
        _, p1, _, lp1 = self._leapfrog(q, p, g, eps)
        delta = H0 - (-lp1 + self._kinetic(p1))
        direction = 1 if delta > math.log(0.8) else -1
        for _ in range(100):
            p = self.rng.standard_normal(self.dim) / np.sqrt(self.inv_metric)
            H0 = -lp + self._kinetic(p)
            _, p1, _, lp1 = self._leapfrog(q, p, g, eps)
            delta = H0 - (-lp1 + self._kinetic(p1))
            if not math.isfinite(delta):
                delta = -math.inf
            if direction == 1 and not delta > math.log(0.8):
                break
            if direction == -1 and not delta < math.log(0.8):
                break
            eps = eps * 2.0 if direction == 1 else eps * 0.5
            if eps > 1e7 or eps < 1e-12:
                break
        self.step_size = eps

    def sample(self, q0, warmup=1000, draws=1000):
        lp, g = self.logp_grad(q0)
        q = np.asarray(q0, float)
        self._init_step_size(q, lp, g)
        windows = _warmup_windows(warmup)
        da = _DualAveraging(self.step_size, self.target_accept)
        buf = []
        warm_div = 0
        for it in range(warmup):
            q, lp, g, acc, div, _, _ = self.transition(q, lp, g)
            warm_div += div
            self.step_size = da.update(acc)
            if it in windows["slow"]:
                buf.append(q)
            if it in windows["ends"]:
                arr = np.asarray(buf)
                m = len(arr)
                var = arr.var(axis=0, ddof=1)
                self.inv_metric = (m / (m + 5.0)) * var + 1e-3 * (5.0 / (m + 5.0))
                buf = []
                self._init_step_size(q, lp, g)
                da = _DualAveraging(self.step_size, self.target_accept)
        if warmup > 0:
            self.step_size = da.final()
        out = np.empty((draws, self.dim))
        acc_s = np.empty(draws)
        div_s = np.zeros(draws, bool)
        depth_s = np.empty(draws, int)
        nl_s = np.empty(draws, int)
        for i in range(draws):
            q, lp, g, acc, div, depth, nl = self.transition(q, lp, g)
            out[i], acc_s[i], div_s[i], depth_s[i], nl_s[i] = q, acc, div, depth, nl
        return ChainResult(out, acc_s, div_s, depth_s, nl_s, self.step_size,
                           self.inv_metric.copy(), int(warm_div))


class _DualAveraging:
    def __init__(self, eps0, target, gamma=0.05, t0=10.0, kappa=0.75):
        self.mu = math.log(10.0 * eps0)
        self.target, self.gamma, self.t0, self.kappa = target, gamma, t0, kappa
        self.h_bar = 0.0
        self.x_bar = 0.0
        self.m = 0

    def update(self, accept):
        self.m += 1
        m = self.m
        w = 1.0 / (m + self.t0)
        self.h_bar = (1.0 - w) * self.h_bar + w * (self.target - accept)
        x = self.mu - math.sqrt(m) / self.gamma * self.h_bar
        mk = m ** -self.kappa
        self.x_bar = mk * x + (1.0 - mk) * self.x_bar
        return math.exp(x)

    def final(self):
        return math.exp(self.x_bar)


def _warmup_windows(warmup, init_buffer=75, term_buffer=50, base_window=25):
    """Iteration indices of slow-window draws and of window ends."""
    if warmup < 20:
        return {"slow": set(), "ends": set()}
    if init_buffer + term_buffer + base_window > warmup:
        init_buffer = int(0.15 * warmup)
        term_buffer = int(0.1 * warmup)
        base_window = warmup - init_buffer - term_buffer
    slow, ends = set(), set()
    start, size = init_buffer, base_window
    last = warmup - term_buffer
    while start < last:
        end = start + size
        # stretch the final window to the terminal buffer
        if end + 2 * size > last:
            end = last
        slow.update(range(start, end))
        ends.add(end - 1)
        start, size = end, size * 2
    return {"slow": slow, "ends": ends}
