"""Hierarchical varying-coefficient model on (possibly) compressed data.

    y_phi | beta, gamma, sigma2 ~ N(X_phi beta + Z_phi gamma, sigma2 I_M)
    gamma | tau2               ~ N(0, Delta),  Delta = blockdiag(tau2_j I_H)
    sigma2 ~ IG(a_sigma, b_sigma),  tau2_j ~ IG(a_tau, b_tau)
    beta   ~ N(mu_beta, V_beta)  or flat

``Z_phi`` is the sketched block design matrix. With an identity sketch this
is the ordinary Gaussian linear mixed model on the raw data.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import gammaln

from .errors import InvalidState, ShapeError

LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class Dataset:
    """Raw observations: locations in ``[0, 1]^d``, response and predictors.

    ``X`` holds predictors with static coefficients (possibly zero columns)
    and ``xtilde`` those with spatially varying coefficients.
    """

    locations: np.ndarray
    y: np.ndarray
    X: np.ndarray
    xtilde: np.ndarray

    def __post_init__(self):
        locs = np.asarray(self.locations, dtype=float)
        if locs.ndim == 1:
            locs = locs[:, None]
        y = np.asarray(self.y, dtype=float).reshape(-1)
        n = y.shape[0]
        X = np.asarray(self.X, dtype=float).reshape(n, -1) if np.size(self.X) else np.zeros((n, 0))
        xt = np.asarray(self.xtilde, dtype=float).reshape(n, -1)
        if n < 1:
            raise ShapeError("dataset must have at least one observation")
        if locs.shape[0] != n:
            raise ShapeError(f"{locs.shape[0]} locations for {n} responses")
        for name, arr in (("locations", locs), ("y", y), ("X", X), ("xtilde", xt)):
            if not np.all(np.isfinite(arr)):
                raise ShapeError(f"{name} contains non-finite values")
        if X.shape[1] and xt.shape[1] > X.shape[1]:
            raise ShapeError("more varying-coefficient predictors than predictors")
        object.__setattr__(self, "locations", locs)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "xtilde", xt)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def d(self):
        return self.locations.shape[1]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def ptilde(self):
        return self.xtilde.shape[1]

    def subset(self, rows):
        return Dataset(self.locations[rows], self.y[rows], self.X[rows], self.xtilde[rows])


@dataclass(frozen=True)
class Priors:
    """Conjugate prior hyperparameters.

    ``beta_mean``/``beta_cov`` are used only when ``flat_beta`` is false.
    """

    a_sigma: float = 2.0
    b_sigma: float = 0.1
    a_tau: float = 2.0
    b_tau: float = 0.1
    flat_beta: bool = True
    beta_mean: np.ndarray | None = None
    beta_cov: np.ndarray | None = None

    def __post_init__(self):
        for name in ("a_sigma", "b_sigma", "a_tau", "b_tau"):
            if not getattr(self, name) > 0:
                raise InvalidState(f"{name} must be positive, got {getattr(self, name)}")
        if not self.flat_beta:
            if self.beta_mean is None or self.beta_cov is None:
                raise InvalidState("normal beta prior requires beta_mean and beta_cov")
            mean = np.atleast_1d(np.asarray(self.beta_mean, dtype=float))
            cov = np.atleast_2d(np.asarray(self.beta_cov, dtype=float))
            if cov.shape != (mean.size, mean.size):
                raise ShapeError("beta_cov must be square and match beta_mean")
            if not np.allclose(cov, cov.T):
                raise InvalidState("beta_cov must be symmetric")
            try:
                np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                raise InvalidState("beta_cov must be positive definite") from None
            object.__setattr__(self, "beta_mean", mean)
            object.__setattr__(self, "beta_cov", cov)

    @classmethod
    def unit_normal_beta(cls, p, **kwargs):
        return cls(flat_beta=False, beta_mean=np.zeros(p), beta_cov=np.eye(p), **kwargs)

    def beta_precision(self, p):
        """Prior precision matrix and precision-weighted mean for beta."""
        if self.flat_beta:
            return np.zeros((p, p)), np.zeros(p)
        if self.beta_mean.size != p:
            raise ShapeError(f"beta prior has dimension {self.beta_mean.size}, model has {p}")
        prec = np.linalg.inv(self.beta_cov)
        return prec, prec @ self.beta_mean


@dataclass
class ModelState:
    beta: np.ndarray
    gamma: np.ndarray
    sigma2: float
    tau2: np.ndarray = field(default_factory=lambda: np.ones(1))

    def __post_init__(self):
        self.beta = np.atleast_1d(np.asarray(self.beta, dtype=float)).copy()
        self.gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float)).copy()
        self.tau2 = np.atleast_1d(np.asarray(self.tau2, dtype=float)).copy()
        self.sigma2 = float(self.sigma2)
        if self.gamma.size % self.tau2.size:
            raise ShapeError(
                f"gamma length {self.gamma.size} is not a multiple of {self.tau2.size} blocks"
            )

    @classmethod
    def initial(cls, p, h, ptilde):
        """Default starting point: beta=0, gamma=0, sigma2=1, tau2=1."""
        return cls(np.zeros(p), np.zeros(h * ptilde), 1.0, np.ones(ptilde))

    @property
    def h(self):
        return self.gamma.size // self.tau2.size

    def delta_diag(self):
        """Diagonal of the block-diagonal prior covariance of gamma."""
        return np.repeat(self.tau2, self.h)

    def gamma_block(self, j):
        return self.gamma[j * self.h:(j + 1) * self.h]

    def copy(self):
        return replace(self)

    def validate(self):
        if not self.sigma2 > 0:
            raise InvalidState(f"sigma2 must be positive, got {self.sigma2}")
        if not np.all(self.tau2 > 0):
            raise InvalidState(f"tau2 must be positive, got {self.tau2}")


def residual(state, data):
    r = data.y_phi - data.Z_phi @ state.gamma
    if data.p:
        r = r - data.X_phi @ state.beta
    return r


def log_likelihood(state, data):
    """Gaussian log likelihood of the compressed response."""
    if not state.sigma2 > 0:
        raise InvalidState(f"sigma2 must be positive, got {state.sigma2}")
    r = residual(state, data)
    m = r.size
    return float(-0.5 * m * (LOG_2PI + np.log(state.sigma2)) - (r @ r) / (2.0 * state.sigma2))


def log_invgamma(x, a, b):
    """Log density of the inverse-gamma distribution (shape ``a``, scale ``b``)."""
    x = np.asarray(x, dtype=float)
    if np.any(x <= 0):
        raise InvalidState("inverse-gamma argument must be positive")
    return a * np.log(b) - gammaln(a) - (a + 1.0) * np.log(x) - b / x


def log_prior(state, priors):
    state.validate()
    total = float(log_invgamma(state.sigma2, priors.a_sigma, priors.b_sigma))
    total += float(np.sum(log_invgamma(state.tau2, priors.a_tau, priors.b_tau)))
    if not priors.flat_beta and state.beta.size:
        prec, _ = priors.beta_precision(state.beta.size)
        diff = state.beta - priors.beta_mean
        _, logdet = np.linalg.slogdet(priors.beta_cov)
        total += float(-0.5 * (diff.size * LOG_2PI + logdet + diff @ prec @ diff))
    delta = state.delta_diag()
    g = state.gamma
    total += float(-0.5 * (g.size * LOG_2PI + np.sum(np.log(delta)) + np.sum(g * g / delta)))
    return total


def log_posterior(state, data, priors):
    """Unnormalized log posterior density."""
    return log_likelihood(state, data) + log_prior(state, priors)
