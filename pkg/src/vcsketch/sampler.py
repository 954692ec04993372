"""Gibbs sampler for the compressed varying-coefficient model.

One iteration updates the blocks in the fixed order gamma, beta, sigma2,
tau2_1..tau2_Ptilde. Every block draws from its own random substream keyed
by ``(seed, chain, iteration, block)``, so a chain is a pure function of its
inputs.

Two exact samplers are provided for gamma:

* :func:`sample_gamma_fast` works in the ``M``-dimensional data space and
  costs ``O(M^3 + M^2 H Ptilde)``;
* :func:`sample_gamma_direct` factorizes the ``H Ptilde``-dimensional
  precision matrix and serves as the reference implementation.
"""

import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np
from scipy import linalg

from .errors import DecompositionError, InvalidState, NumericError, ShapeError, VCSketchError
from .model import ModelState, residual
from .rng import substream

GAMMA_SAMPLERS = ("fast", "direct")

# substream block ids
BLOCK_GAMMA = 0
BLOCK_BETA = 1
BLOCK_SIGMA2 = 2
BLOCK_TAU2 = 3  # tau2_j uses BLOCK_TAU2 + j

JITTER_SCALE = 1e-8
JITTER_TRIES = 3

# precompute per-block M x M grams for the fast sampler below this many bytes
GRAM_CACHE_BYTES = 512 * 2**20


@dataclass(frozen=True)
class ChainConfig:
    iterations: int = 5000
    burn_in: int = 3000
    thin: int = 1
    seed: int = 0
    gamma_sampler: str = "fast"

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must satisfy 0 <= burn_in < iterations")
        if self.thin < 1:
            raise ValueError("thin must be >= 1")
        if self.gamma_sampler not in GAMMA_SAMPLERS:
            raise ValueError(f"gamma_sampler must be one of {GAMMA_SAMPLERS}")

    @property
    def n_retained(self):
        return -(-(self.iterations - self.burn_in) // self.thin)


@dataclass
class PosteriorDraws:
    """Retained draws; row ``l`` of each array is one posterior sample."""

    beta: np.ndarray
    gamma: np.ndarray
    sigma2: np.ndarray
    tau2: np.ndarray
    iterations: np.ndarray
    seconds: float
    seed: int
    chain: int
    config: dict

    @property
    def n_draws(self):
        return self.sigma2.shape[0]

    @property
    def ptilde(self):
        return self.tau2.shape[1]

    @property
    def h(self):
        return self.gamma.shape[1] // self.ptilde

    def scalar_chains(self):
        """All scalar parameter traces as ``(names, L x K array)``."""
        p, hp, pt = self.beta.shape[1], self.gamma.shape[1], self.ptilde
        h = hp // pt if pt else 0
        names = [f"beta[{i}]" for i in range(p)]
        names += [f"gamma[{j},{k}]" for j in range(pt) for k in range(h)]
        names += ["sigma2"] + [f"tau2[{j}]" for j in range(pt)]
        arr = np.column_stack([self.beta, self.gamma, self.sigma2[:, None], self.tau2])
        return names, arr

    def state(self, l):
        return ModelState(self.beta[l], self.gamma[l], self.sigma2[l], self.tau2[l])


def pool_draws(draws_list):
    """Concatenate draws from several chains (timing is summed)."""
    if len(draws_list) == 1:
        return draws_list[0]
    first = draws_list[0]
    return PosteriorDraws(
        beta=np.concatenate([d.beta for d in draws_list]),
        gamma=np.concatenate([d.gamma for d in draws_list]),
        sigma2=np.concatenate([d.sigma2 for d in draws_list]),
        tau2=np.concatenate([d.tau2 for d in draws_list]),
        iterations=np.concatenate([d.iterations for d in draws_list]),
        seconds=float(sum(d.seconds for d in draws_list)),
        seed=first.seed,
        chain=-1,
        config=first.config,
    )


def stable_cholesky(A, jitter=True):
    """Lower Cholesky factor, retrying with diagonal jitter on failure."""
    A = np.asarray(A, dtype=float)
    if not np.all(np.isfinite(A)):
        raise NumericError("matrix to factorize has non-finite entries")
    try:
        return linalg.cholesky(A, lower=True, check_finite=False)
    except linalg.LinAlgError:
        if not jitter:
            raise DecompositionError("matrix is not positive definite") from None
    eps = JITTER_SCALE * float(np.mean(np.diag(A)))
    work = A.copy()
    for _ in range(JITTER_TRIES):
        work[np.diag_indices_from(work)] += eps
        try:
            return linalg.cholesky(work, lower=True, check_finite=False)
        except linalg.LinAlgError:
            continue
    raise DecompositionError(
        f"Cholesky failed after {JITTER_TRIES} jitter attempts of {eps:.3g}"
    )


def _inverse_gamma(rng, shape, scale):
    return scale / rng.gamma(shape)


def sigma2_conditional(state, data, priors):
    """Shape and scale of the inverse-gamma full conditional of sigma2."""
    r = residual(state, data)
    ss = float(r @ r)
    if not np.isfinite(ss):
        raise NumericError("non-finite residual sum of squares")
    return priors.a_sigma + 0.5 * data.m, priors.b_sigma + 0.5 * ss


def sample_sigma2(state, data, priors, rng):
    shape, scale = sigma2_conditional(state, data, priors)
    return float(_inverse_gamma(rng, shape, scale))


def tau2_conditional(state, priors, j):
    g = state.gamma_block(j)
    ss = float(g @ g)
    if not np.isfinite(ss):
        raise NumericError("non-finite gamma block")
    return priors.a_tau + 0.5 * state.h, priors.b_tau + 0.5 * ss


def sample_tau2(state, priors, rng, j):
    shape, scale = tau2_conditional(state, priors, j)
    return float(_inverse_gamma(rng, shape, scale))


def beta_conditional(state, data, priors):
    """Mean and lower Cholesky factor of the precision of beta's full conditional."""
    p = data.p
    if p < 1:
        raise ShapeError("model has no static coefficients")
    prior_prec, prior_shift = priors.beta_precision(p)
    X = data.X_phi
    prec = X.T @ X / state.sigma2 + prior_prec
    rhs = X.T @ (data.y_phi - data.Z_phi @ state.gamma) / state.sigma2 + prior_shift
    try:
        chol = linalg.cholesky(prec, lower=True, check_finite=True)
    except (linalg.LinAlgError, ValueError):
        raise DecompositionError("beta precision matrix is singular") from None
    piv = np.diag(chol) ** 2
    if piv.min() <= piv.max() * p * np.finfo(float).eps:
        raise DecompositionError("beta precision matrix is numerically singular")
    mean = linalg.cho_solve((chol, True), rhs)
    return mean, chol


def sample_beta(state, data, priors, rng):
    mean, chol = beta_conditional(state, data, priors)
    z = rng.standard_normal(mean.size)
    return mean + linalg.solve_triangular(chol, z, lower=True, trans="T")


def block_grams(data):
    """Per-block ``Z_j Z_j^T`` so that ``Z Delta Z^T = sum_j tau2_j G_j``."""
    h = data.h
    return np.stack(
        [data.Z_phi[:, j * h:(j + 1) * h] @ data.Z_phi[:, j * h:(j + 1) * h].T
         for j in range(data.ptilde)]
    )


def sample_gamma_fast(state, data, rng, gamma1=None, gamma2=None, grams=None):
    """Exact draw of gamma working with an ``M x M`` system.

    Steps:

    1. ``g1 ~ N(0, Delta)``, ``g2 ~ N(0, I_M)``
    2. ``g3 = Z g1 / sigma + g2``
    3. solve ``(Z Delta Z^T / sigma2 + I_M) g4 = (y - X beta) / sigma - g3``
    4. ``g5 = g1 + Delta Z^T g4 / sigma``

    ``gamma1``/``gamma2`` override the random draws in step 1 (``gamma1`` is
    already scaled, i.e. a draw from ``N(0, Delta)``). ``grams`` may carry
    the cached output of :func:`block_grams`.
    """
    state.validate()
    Z = data.Z_phi
    m = data.m
    sigma = np.sqrt(state.sigma2)
    delta = state.delta_diag()
    if delta.size != Z.shape[1]:
        raise ShapeError(f"state has {delta.size} basis coefficients, design has {Z.shape[1]}")

    if gamma1 is None:
        gamma1 = np.sqrt(delta) * rng.standard_normal(delta.size)
    if gamma2 is None:
        gamma2 = rng.standard_normal(m)
    g3 = Z @ gamma1 / sigma + gamma2

    if grams is not None:
        K = np.tensordot(state.tau2, grams, axes=1) / state.sigma2
    else:
        K = (Z * delta) @ Z.T / state.sigma2
    K[np.diag_indices(m)] += 1.0

    target = data.y_phi if not data.p else data.y_phi - data.X_phi @ state.beta
    rhs = target / sigma - g3
    chol = stable_cholesky(K)
    g4 = linalg.cho_solve((chol, True), rhs, check_finite=False)
    return gamma1 + delta * (Z.T @ g4) / sigma


def gamma_conditional(state, data, ztz=None):
    """Mean of gamma's full conditional and the lower Cholesky factor of
    its precision ``Z^T Z / sigma2 + Delta^{-1}``."""
    state.validate()
    Z = data.Z_phi
    if ztz is None:
        ztz = Z.T @ Z
    prec = ztz / state.sigma2
    prec[np.diag_indices_from(prec)] += 1.0 / state.delta_diag()
    if np.max(np.abs(prec - prec.T)) > 1e-12 * max(1.0, np.max(np.abs(prec))):
        raise NumericError("gamma precision matrix is not symmetric")
    target = data.y_phi if not data.p else data.y_phi - data.X_phi @ state.beta
    chol = stable_cholesky(prec)
    mean = linalg.cho_solve((chol, True), Z.T @ target / state.sigma2, check_finite=False)
    return mean, chol


def sample_gamma_direct(state, data, rng, ztz=None):
    """Exact draw of gamma via Cholesky of the ``H Ptilde`` precision."""
    mean, chol = gamma_conditional(state, data, ztz)
    z = rng.standard_normal(mean.size)
    return mean + linalg.solve_triangular(chol, z, lower=True, trans="T", check_finite=False)


def gamma_moments(state, data):
    """Closed-form mean and covariance of gamma's full conditional."""
    Z = data.Z_phi
    prec = Z.T @ Z / state.sigma2 + np.diag(1.0 / state.delta_diag())
    cov = np.linalg.inv(prec)
    cov = 0.5 * (cov + cov.T)
    target = data.y_phi if not data.p else data.y_phi - data.X_phi @ state.beta
    return cov @ (Z.T @ target) / state.sigma2, cov


def run_gibbs(data, priors, config, chain=0, init=None):
    """Run one Gibbs chain and return the retained draws."""
    p, h, pt = data.p, data.h, data.ptilde
    state = init.copy() if init is not None else ModelState.initial(p, h, pt)
    if p and not priors.flat_beta and priors.beta_mean.size != p:
        raise ShapeError(f"beta prior has dimension {priors.beta_mean.size}, model has {p}")

    L = config.n_retained
    out_beta = np.empty((L, p))
    out_gamma = np.empty((L, h * pt))
    out_sigma2 = np.empty(L)
    out_tau2 = np.empty((L, pt))
    out_iter = np.empty(L, dtype=np.int64)

    start = time.perf_counter()
    grams = ztz = None
    if config.gamma_sampler == "fast":
        if pt * data.m * data.m * 8 <= GRAM_CACHE_BYTES:
            grams = block_grams(data)
    else:
        ztz = data.Z_phi.T @ data.Z_phi

    seed = config.seed
    k = 0
    for it in range(config.iterations):
        try:
            rng = substream(seed, chain, it, BLOCK_GAMMA)
            if config.gamma_sampler == "fast":
                state.gamma = sample_gamma_fast(state, data, rng, grams=grams)
            else:
                state.gamma = sample_gamma_direct(state, data, rng, ztz=ztz)
            if p:
                state.beta = sample_beta(state, data, priors, substream(seed, chain, it, BLOCK_BETA))
            state.sigma2 = sample_sigma2(state, data, priors, substream(seed, chain, it, BLOCK_SIGMA2))
            for j in range(pt):
                state.tau2[j] = sample_tau2(state, priors, substream(seed, chain, it, BLOCK_TAU2 + j), j)
        except VCSketchError as exc:
            raise type(exc)(f"iteration {it}: {exc}") from exc
        if not (state.sigma2 > 0 and np.all(state.tau2 > 0)):
            raise InvalidState(f"iteration {it}: non-positive variance draw")
        if it >= config.burn_in and (it - config.burn_in) % config.thin == 0:
            out_beta[k] = state.beta
            out_gamma[k] = state.gamma
            out_sigma2[k] = state.sigma2
            out_tau2[k] = state.tau2
            out_iter[k] = it
            k += 1
    seconds = time.perf_counter() - start
    return PosteriorDraws(
        beta=out_beta, gamma=out_gamma, sigma2=out_sigma2, tau2=out_tau2,
        iterations=out_iter, seconds=seconds, seed=seed, chain=chain,
        config=asdict(config),
    )


def _run_chain(args):
    data, priors, config, chain = args
    return run_gibbs(data, priors, config, chain=chain)


def run_chains(data, priors, config, n_chains, max_workers=None):
    """Run independent chains in worker processes; results ordered by chain."""
    if n_chains < 1:
        raise ValueError("n_chains must be >= 1")
    if n_chains == 1:
        return [run_gibbs(data, priors, config, chain=0)]
    jobs = [(data, priors, config, c) for c in range(n_chains)]
    with ProcessPoolExecutor(max_workers=max_workers) as pool:
        return list(pool.map(_run_chain, jobs))
