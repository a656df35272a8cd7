"""Collapse of the n-row training plate into a few auxiliary variables.

The agent believes the model was trained on n rows

    X_i = alpha_x_mu + alpha_x_sigma * eps_x_i
    A_i = d * X_i + alpha_a_mu + alpha_a_sigma * eps_a_i
    Y_i = a + b * X_i + n_e * A_i + alpha_y_mu + alpha_y_sigma * eps_y_i

and that the model is the no-intercept OLS slope ``phi = sum(XY) / sum(X^2)``.
Instead of materialising the 3n standard normals, ``phi`` is rebuilt from
three N(0, n) sums and five chi-square(n - 1) quadratic forms.

All functions accept scalars or equally-shaped numpy arrays in the
``AuxDraw`` fields, so a batch of draws composes in one call.
"""
import csv
from dataclasses import dataclass, fields

import numpy as np

from . import rng as _rng
from .errors import DegenerateCompositionError, InsufficientDofError
from .predictor import fit_ols_no_intercept

AUX_NAMES = ("s_x", "s_y", "s_a", "z_xx", "u_xy", "v_xy", "u_xa", "v_xa")
HYPER_NAMES = ("alpha_x_mu", "alpha_x_sigma", "alpha_a_mu", "alpha_a_sigma",
               "alpha_y_mu", "alpha_y_sigma", "n_e")


@dataclass(frozen=True)
class PlateParams:
    alpha_x_mu: float = 80.0
    alpha_x_sigma: float = 10.0
    alpha_a_mu: float = 2.0
    alpha_a_sigma: float = 1.0
    alpha_y_mu: float = 0.0
    alpha_y_sigma: float = 0.1
    n_e: float = 1.0
    n: int = 1000
    a: float = 12.0
    b: float = -0.1
    d: float = 0.125

    def __post_init__(self):
        for name in ("alpha_x_sigma", "alpha_a_sigma", "alpha_y_sigma"):
            if np.any(np.asarray(getattr(self, name)) < 0):
                raise ValueError(f"{name} must be >= 0")
        if self.n < 2:
            raise InsufficientDofError(f"plate size must be >= 2, got {self.n}")


@dataclass(frozen=True)
class AuxDraw:
    s_x: float
    s_y: float
    s_a: float
    z_xx: float
    u_xy: float
    v_xy: float
    u_xa: float
    v_xa: float

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}

    @classmethod
    def zeros(cls):
        return cls(*([0.0] * len(AUX_NAMES)))


@dataclass(frozen=True)
class StatBundle:
    s1: float
    s2: float
    s3: float
    s4: float
    s5: float
    s6: float
    s7: float
    s8: float
    s9: float

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


def compose_stats(p: PlateParams, aux: AuxDraw, s7_minus=False) -> StatBundle:
    """Rebuild the nine intermediate sums from one auxiliary draw.

    ``s7`` is the sum of squared standard normals. It is recovered as
    ``z_xx + s_x**2 / n`` (centred sum of squares plus the mean part). Pass
    ``s7_minus=True`` to use ``z_xx - s_x**2 / n`` instead, which is
    kept only so the difference can be measured.
    """
    n = p.n
    xm, xs = p.alpha_x_mu, p.alpha_x_sigma
    am, as_ = p.alpha_a_mu, p.alpha_a_sigma
    ym, ys = p.alpha_y_mu, p.alpha_y_sigma
    s9 = aux.s_x * aux.s_a / n + 0.5 * (aux.u_xa - aux.v_xa)
    s8 = aux.s_x * aux.s_y / n + 0.5 * (aux.u_xy - aux.v_xy)
    if s7_minus:
        s7 = aux.z_xx - aux.s_x ** 2 / n
    else:
        s7 = aux.z_xx + aux.s_x ** 2 / n
    s6 = n * xm * ym + xm * ys * aux.s_y + ym * xs * aux.s_x + xs * ys * s8
    s5 = p.n_e * (n * xm * am + xm * as_ * aux.s_a + am * xs * aux.s_x + xs * as_ * s9)
    s4 = p.a * n * xm + p.a * xs * aux.s_x
    s3 = xs ** 2 * s7
    s2 = 2.0 * xm * xs * aux.s_x
    s1 = n * xm ** 2
    return StatBundle(s1, s2, s3, s4, s5, s6, s7, s8, s9)


def compose_phi(p: PlateParams, aux: AuxDraw, s7_minus=False):
    """One draw of the fitted slope implied by ``p`` and ``aux``."""
    st = compose_stats(p, aux, s7_minus=s7_minus)
    denom = st.s1 + st.s2 + st.s3
    bad = ~(np.asarray(denom) > 0)
    if np.any(bad):
        raise DegenerateCompositionError(
            f"non-positive denominator s1+s2+s3 for aux draw {aux}", aux=aux)
    return p.b + p.d * p.n_e + (st.s4 + st.s5 + st.s6) / denom


def sample_aux(n: int, seed, size=None) -> AuxDraw:
    """Independent draws of the eight auxiliary variables for plate size n.

    With ``size`` given every field is an array of that shape.
    """
    if n < 2:
        raise InsufficientDofError(f"need n >= 2 for chi-square(n - 1) auxiliaries, got {n}")
    g = _rng.stream(seed, _rng.AUX)
    sd = np.sqrt(n)
    k = n - 1.0
    s_x = g.normal(0.0, sd, size)
    s_y = g.normal(0.0, sd, size)
    s_a = g.normal(0.0, sd, size)
    chis = [g.chisquare(k, size) for _ in range(5)]
    if size is None:
        s_x, s_y, s_a = float(s_x), float(s_y), float(s_a)
        chis = [float(c) for c in chis]
    return AuxDraw(s_x, s_y, s_a, *chis)


def explicit_plate_rows(p: PlateParams, seed):
    """Materialise the n plate rows the agent believes in; returns (x, a, y)."""
    g = _rng.stream(seed, _rng.PLATE)
    eps = g.standard_normal((3, p.n))
    x = p.alpha_x_mu + p.alpha_x_sigma * eps[0]
    a = p.d * x + p.alpha_a_mu + p.alpha_a_sigma * eps[1]
    y = p.a + p.b * x + p.n_e * a + p.alpha_y_mu + p.alpha_y_sigma * eps[2]
    return x, a, y


def explicit_plate_phi(p: PlateParams, seed) -> float:
    """Slope fitted on an explicitly simulated plate (oracle for compose_phi)."""
    x, _, y = explicit_plate_rows(p, seed)
    return fit_ols_no_intercept((x, y)).phi


def dump_triples(p: PlateParams, draws: int, seed, path):
    """Write ``draws`` rows of (aux, stats, phi) to a CSV file."""
    aux = sample_aux(p.n, seed, size=draws)
    st = compose_stats(p, aux)
    phi = compose_phi(p, aux)
    cols = list(AUX_NAMES) + [f"s{i}" for i in range(1, 10)] + ["phi"]
    arrays = [getattr(aux, k) for k in AUX_NAMES] + \
        [np.broadcast_to(getattr(st, f"s{i}"), (draws,)) for i in range(1, 10)] + [phi]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for row in zip(*(a.tolist() for a in arrays)):
            w.writerow([repr(v) for v in row])
