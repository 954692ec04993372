"""Synthetic spatially varying coefficient data.

Locations are uniform on ``[0, 1]^d``; ``xtilde_1 = 1`` and the remaining
varying predictors are standard normal; each true surface ``w_j`` is a
zero-mean Gaussian process with covariance

    C(u, u') = delta2_j * exp(-0.5 * ||u - u'|| / phi_j)

simulated exactly by a dense Cholesky factorization, and
``y = sum_j xtilde_j w_j + eps`` with ``eps ~ N(0, noise_var)``.
Training and held-out points are drawn jointly from the same process.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.spatial.distance import cdist

from .errors import DecompositionError, SizeError
from .model import Dataset
from .rng import substream

BENCHMARK_DELTA2 = (1.0, 0.8, 1.1)
BENCHMARK_PHI = (1.0, 1.25, 2.0)

_SIM_STREAM = 0x51A1
_LOC, _PRED, _NOISE, _SURFACE = 0, 1, 2, 3

# relative jitter ladder for the kernel Cholesky
_JITTER = (0.0, 1e-10, 1e-9, 1e-8)


@dataclass(frozen=True)
class SimConfig:
    n: int
    n_test: int = 0
    d: int = 2
    delta2: tuple = BENCHMARK_DELTA2
    phi: tuple = BENCHMARK_PHI
    noise_var: float = 0.1
    seed: int = 0
    max_dense: int = 20000

    def __post_init__(self):
        object.__setattr__(self, "delta2", tuple(float(v) for v in self.delta2))
        object.__setattr__(self, "phi", tuple(float(v) for v in self.phi))
        if self.n < 1 or self.n_test < 0:
            raise ValueError("need n >= 1 and n_test >= 0")
        if self.d < 1:
            raise ValueError("d must be >= 1")
        if len(self.delta2) != len(self.phi) or not self.delta2:
            raise ValueError("delta2 and phi must be non-empty and of equal length")
        if min(self.delta2) <= 0 or min(self.phi) <= 0:
            raise ValueError("delta2 and phi must be positive")
        if not self.noise_var > 0:
            raise ValueError("noise_var must be positive")

    @property
    def ptilde(self):
        return len(self.delta2)

    @property
    def total(self):
        return self.n + self.n_test


@dataclass(frozen=True)
class SimTruth:
    """True surfaces at all generated locations plus the generating config."""

    w_train: np.ndarray  # n x Ptilde
    w_test: np.ndarray  # n_test x Ptilde
    config: SimConfig = field(repr=False)


def exp_cov(u, v, delta2, phi):
    """Covariance between two locations (or between rows of two arrays)."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    dist = np.sqrt(np.sum((u - v) ** 2, axis=-1))
    return delta2 * np.exp(-0.5 * dist / phi)


def kernel_matrix(locations, delta2, phi):
    dist = cdist(locations, locations)
    return delta2 * np.exp(-0.5 * dist / phi)


def kernel_cholesky(K, scale):
    """Lower Cholesky of ``K``, climbing a relative-jitter ladder if needed."""
    for eps in _JITTER:
        A = K if eps == 0.0 else K + eps * scale * np.eye(K.shape[0])
        try:
            return linalg.cholesky(A, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise DecompositionError(
        f"kernel matrix not positive definite after jitter {_JITTER[-1]:g} x {scale:g}"
    )


def simulate_surfaces(locations, config):
    """Draw each true surface at ``locations``; returns ``n x Ptilde``."""
    n = locations.shape[0]
    if n > config.max_dense:
        raise SizeError(
            f"{n} locations exceed the dense GP cap max_dense={config.max_dense}; "
            "raise max_dense or reduce n"
        )
    dist = cdist(locations, locations)
    w = np.empty((n, config.ptilde))
    for j, (d2, ph) in enumerate(zip(config.delta2, config.phi)):
        K = d2 * np.exp(-0.5 * dist / ph)
        chol = kernel_cholesky(K, d2)
        z = substream(_SIM_STREAM, config.seed, _SURFACE + j).standard_normal(n)
        w[:, j] = chol @ z
    return w


def simulate(config):
    """Generate ``(train, test, truth)``.

    Both datasets have no static predictors (``X`` has zero columns) and
    ``xtilde = [1, x_2, ..., x_Ptilde]``.
    """
    total = config.total
    if total > config.max_dense:
        raise SizeError(
            f"{total} locations exceed the dense GP cap max_dense={config.max_dense}; "
            "raise max_dense or reduce n"
        )
    seed = config.seed
    locs = substream(_SIM_STREAM, seed, _LOC).random((total, config.d))
    xt = np.ones((total, config.ptilde))
    if config.ptilde > 1:
        xt[:, 1:] = substream(_SIM_STREAM, seed, _PRED).standard_normal((total, config.ptilde - 1))
    w = simulate_surfaces(locs, config)
    mean = np.sum(xt * w, axis=1)
    eps = substream(_SIM_STREAM, seed, _NOISE).standard_normal(total)
    y = mean + np.sqrt(config.noise_var) * eps

    n = config.n
    empty = np.zeros((total, 0))
    train = Dataset(locs[:n], y[:n], empty[:n], xt[:n])
    test = Dataset(locs[n:], y[n:], empty[n:], xt[n:]) if config.n_test else None
    truth = SimTruth(w_train=w[:n], w_test=w[n:], config=config)
    return train, test, truth
