"""The true linear-Gaussian data generating process and interventions on it.

Structural equations::

    X := N_X
    A := d * X + N_A
    Y := a + b * X + e * A + N_Y

with independent Gaussian noise terms.
"""
import csv
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple, Sequence

import numpy as np

from . import rng as _rng
from .errors import EmptyCohortError


@dataclass(frozen=True)
class LinearGaussianScm:
    intercept_a: float = 12.0
    coeff_x_b: float = -0.1
    treat_effect_e: float = 1.0
    assign_coeff_d: float = 0.125
    noise_x: tuple = (80.0, 10.0)
    noise_a: tuple = (2.0, 1.0)
    noise_y: tuple = (0.0, 0.1)

    def __post_init__(self):
        for name in ("noise_x", "noise_a", "noise_y"):
            mean, std = getattr(self, name)
            if not std >= 0:
                raise ValueError(f"{name} std must be >= 0, got {std}")
            object.__setattr__(self, name, (float(mean), float(std)))

    @property
    def constants(self):
        """The (a, b, d) triple an agent is assumed to know."""
        return (self.intercept_a, self.coeff_x_b, self.assign_coeff_d)

    def to_dict(self):
        return {
            "intercept_a": self.intercept_a,
            "coeff_x_b": self.coeff_x_b,
            "treat_effect_e": self.treat_effect_e,
            "assign_coeff_d": self.assign_coeff_d,
            "noise_x": list(self.noise_x),
            "noise_a": list(self.noise_a),
            "noise_y": list(self.noise_y),
        }

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        for k in ("noise_x", "noise_a", "noise_y"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


class HistRecord(NamedTuple):
    x: float
    a: float
    y: float


@dataclass(frozen=True)
class Cohort:
    """A historical cohort stored column-wise; iterates as ``HistRecord``."""

    x: np.ndarray
    a: np.ndarray
    y: np.ndarray = field(repr=False)

    def __len__(self):
        return len(self.x)

    def __iter__(self) -> Iterator[HistRecord]:
        for row in zip(self.x.tolist(), self.a.tolist(), self.y.tolist()):
            yield HistRecord(*row)

    def __getitem__(self, i):
        return HistRecord(float(self.x[i]), float(self.a[i]), float(self.y[i]))

    @classmethod
    def from_records(cls, records: Sequence[HistRecord]):
        arr = np.asarray([tuple(r) for r in records], dtype=float).reshape(-1, 3)
        return cls(arr[:, 0].copy(), arr[:, 1].copy(), arr[:, 2].copy())

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "a", "y"])
            for rec in self:
                w.writerow([repr(rec.x), repr(rec.a), repr(rec.y)])

    @classmethod
    def from_csv(cls, path):
        with open(path, newline="") as fh:
            reader = csv.DictReader(fh)
            rows = [HistRecord(float(r["x"]), float(r["a"]), float(r["y"])) for r in reader]
        return cls.from_records(rows)


def sample_historical(scm: LinearGaussianScm, n: int, seed) -> Cohort:
    """Draw ``n`` i.i.d. rows (x, a, y) from the SCM."""
    if n < 1:
        raise EmptyCohortError("empty cohort: n must be >= 1")
    g = _rng.stream(seed, _rng.COHORT)
    # one (n, 3) block keeps the stream layout independent of n-chunking
    eps = g.standard_normal((n, 3))
    x = scm.noise_x[0] + scm.noise_x[1] * eps[:, 0]
    a = scm.assign_coeff_d * x + scm.noise_a[0] + scm.noise_a[1] * eps[:, 1]
    y = (scm.intercept_a + scm.coeff_x_b * x + scm.treat_effect_e * a
         + scm.noise_y[0] + scm.noise_y[1] * eps[:, 2])
    return Cohort(x, a, y)


def outcome_under_do(scm: LinearGaussianScm, x, dose, noise_y=0.0):
    """Outcome with the assignment of A replaced by ``dose``."""
    return scm.intercept_a + scm.coeff_x_b * x + scm.treat_effect_e * dose + noise_y


def historical_policy(scm: LinearGaussianScm) -> Callable[[float], float]:
    """Deterministic part of the historical protocol, x -> d*x + E[N_A]."""
    d, mean_a = scm.assign_coeff_d, scm.noise_a[0]
    return lambda x: d * x + mean_a


def constant_policy(dose) -> Callable[[float], float]:
    return lambda x: dose


def effect_of_decision_support(scm: LinearGaussianScm, act_with_ds, act_without_ds, n: int, seed):
    """Paired Monte Carlo estimate of the outcome risk difference.

    Each simulated patient gets one covariate draw and one outcome-noise
    draw, reused under both policies, so the two arms differ only through
    the dose each policy assigns.

    Returns
    -------
    (mean_y_with, mean_y_without, risk_difference)
    """
    if n < 1:
        raise EmptyCohortError("empty cohort: n must be >= 1")
    g = _rng.stream(seed, _rng.PATIENT)
    eps = g.standard_normal((n, 2))
    x = scm.noise_x[0] + scm.noise_x[1] * eps[:, 0]
    noise_y = scm.noise_y[0] + scm.noise_y[1] * eps[:, 1]
    dose_with = np.array([act_with_ds(xi) for xi in x.tolist()], dtype=float)
    dose_without = np.array([act_without_ds(xi) for xi in x.tolist()], dtype=float)
    y_with = outcome_under_do(scm, x, dose_with, noise_y)
    y_without = outcome_under_do(scm, x, dose_without, noise_y)
    diff = y_with - y_without
    return float(np.mean(y_with)), float(np.mean(y_without)), float(np.mean(diff))


class Dose(float):
    """A dose restricted to a declared (low, high) pair."""

    def __new__(cls, value, pair=(10.0, 20.0)):
        low, high = float(pair[0]), float(pair[1])
        if float(value) not in (low, high):
            raise ValueError(f"dose {value} is not one of {low}, {high}")
        obj = super().__new__(cls, value)
        obj.pair = (low, high)
        return obj

    @property
    def is_high(self):
        return float(self) == self.pair[1]

    def __repr__(self):
        return f"Dose({float(self)!r})"
