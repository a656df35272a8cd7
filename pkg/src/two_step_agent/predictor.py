"""Slope-only linear prediction model ``y ~ phi * x`` fitted by least squares."""
import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from .errors import DegenerateDesignError, EmptyCohortError
from .scm import Cohort


@dataclass(frozen=True)
class SlopeOnlyLinearModel:
    phi: float
    n_train: int

    def __post_init__(self):
        if not math.isfinite(self.phi):
            raise ValueError("phi must be finite")
        if self.n_train < 1:
            raise ValueError("n_train must be >= 1")

    def to_dict(self):
        return asdict(self)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)
            fh.write("\n")

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            d = json.load(fh)
        return cls(phi=float(d["phi"]), n_train=int(d["n_train"]))


def _columns(data):
    if isinstance(data, Cohort):
        return data.x, data.y
    if isinstance(data, tuple) and len(data) == 2:
        return np.asarray(data[0], float), np.asarray(data[1], float)
    rows = list(data)
    x = np.array([r[0] for r in rows], dtype=float)
    y = np.array([r[2] for r in rows], dtype=float)
    return x, y


def fit_ols_no_intercept(data) -> SlopeOnlyLinearModel:
    """Closed-form OLS slope without intercept, ``sum(x*y) / sum(x**2)``.

    ``data`` may be a :class:`Cohort`, an iterable of ``HistRecord`` or an
    ``(x, y)`` pair of arrays. Sums use ``math.fsum`` so that large cohorts
    with x around 80 do not lose digits.
    """
    x, y = _columns(data)
    if len(x) == 0:
        raise EmptyCohortError("empty cohort: cannot fit a model on no rows")
    sxx = math.fsum((x * x).tolist())
    if sxx <= 0.0:
        raise DegenerateDesignError("degenerate design: sum(x**2) == 0")
    sxy = math.fsum((x * y).tolist())
    return SlopeOnlyLinearModel(phi=sxy / sxx, n_train=len(x))


def predict(model: SlopeOnlyLinearModel, x):
    return model.phi * x
