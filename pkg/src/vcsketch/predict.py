"""Posterior predictive inference by composition sampling.

For each retained draw ``l``: evaluate the coefficient surfaces from
``gamma^(l)`` at the new locations, then draw
``y ~ N(x' beta^(l) + sum_j xtilde_j w_j^(l), sigma2^(l))``.

Quantiles use linear interpolation between order statistics (the "type 7"
estimator, numpy's default).
"""

import csv
from dataclasses import dataclass

import numpy as np

from .basis import tensor_basis_matrix
from .errors import ShapeError


@dataclass(frozen=True)
class PredictionRequest:
    locations: np.ndarray
    X_new: np.ndarray
    xtilde_new: np.ndarray

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        if locs.ndim == 1:
            locs = locs[:, None]
        n = locs.shape[0]
        X = np.asarray(self.X_new, dtype=float)
        xt = np.asarray(self.xtilde_new, dtype=float)
        X = np.zeros((n, 0)) if X.size == 0 and len(X) in (0, n) else X
        if X.ndim == 1:
            X = X[:, None]
        if xt.ndim == 1:
            xt = xt[:, None]
        if X.shape[0] != n or xt.shape[0] != n:
            raise ShapeError("prediction inputs disagree on the number of rows")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "X_new", X)
        object.__setattr__(self, "xtilde_new", xt)

    @classmethod
    def from_dataset(cls, data):
        return cls(data.locations, data.X, data.xtilde)

    @property
    def n(self):
        return self.locations.shape[0]


@dataclass(frozen=True)
class PredictiveDraws:
    draws: np.ndarray  # L x N*
    median: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    level: float = 0.95


def interval_summary(samples, level=0.95, axis=0):
    """Median and equal-tailed interval along ``axis``."""
    alpha = 0.5 * (1.0 - level)
    q = np.quantile(samples, [alpha, 0.5, 1.0 - alpha], axis=axis)
    return q[1], q[0], q[2]


def reconstruct_w(draws, locations, spec):
    """Coefficient surfaces for every draw: array of shape ``(L, n, Ptilde)``."""
    basis = tensor_basis_matrix(spec, locations)
    gamma = draws.gamma if hasattr(draws, "gamma") else np.asarray(draws)
    gamma = np.atleast_2d(gamma)
    h = spec.h
    if gamma.shape[1] % h:
        raise ShapeError(f"gamma width {gamma.shape[1]} is not a multiple of H={h}")
    pt = gamma.shape[1] // h
    return np.stack([gamma[:, j * h:(j + 1) * h] @ basis.T for j in range(pt)], axis=-1)


def predictive_mean(draws, request, spec):
    """Per-draw mean surface at the request locations, ``L x N*``."""
    w = reconstruct_w(draws, request.locations, spec)
    if request.xtilde_new.shape[1] != w.shape[2]:
        raise ShapeError(
            f"request has {request.xtilde_new.shape[1]} varying predictors, model has {w.shape[2]}"
        )
    mean = np.einsum("lnj,nj->ln", w, request.xtilde_new)
    if draws.beta.shape[1]:
        if request.X_new.shape[1] != draws.beta.shape[1]:
            raise ShapeError(
                f"request has {request.X_new.shape[1]} static predictors, model has {draws.beta.shape[1]}"
            )
        mean = mean + draws.beta @ request.X_new.T
    return mean


def predict(draws, request, spec, rng, level=0.95):
    """One predictive draw per retained posterior sample and location."""
    mean = predictive_mean(draws, request, spec)
    sd = np.sqrt(np.asarray(draws.sigma2, dtype=float))[:, None]
    ynew = mean + sd * rng.standard_normal(mean.shape)
    med, lo, hi = interval_summary(ynew, level)
    return PredictiveDraws(ynew, med, lo, hi, level)


def write_summary_csv(path, locations, pred):
    locs = np.asarray(locations, dtype=float)
    d = locs.shape[1]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"u{i + 1}" for i in range(d)] + ["median", "lower", "upper"])
        for i in range(locs.shape[0]):
            w.writerow([repr(float(v)) for v in locs[i]]
                       + [repr(float(pred.median[i])), repr(float(pred.lower[i])), repr(float(pred.upper[i]))])
