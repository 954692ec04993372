"""Tensor-product B-spline bases on the unit box and the block design matrix.

Knots are clamped and uniform: each axis has ``q`` boundary knots at 0 and
at 1 and ``H_j - q`` equally spaced interior knots, giving exactly ``H_j``
basis functions of order ``q`` (degree ``q - 1``).

Tensor indices are flattened with the first axis major, i.e. for ``d = 2``
the basis function ``(h1, h2)`` sits at position ``h1 * H2 + h2``.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DomainError, InvalidOrder, ShapeError


def clamped_knots(h, q):
    """Extended knot vector of length ``h + q`` on ``[0, 1]``."""
    if q < 1:
        raise InvalidOrder(f"order must be >= 1, got {q}")
    if h < q:
        raise InvalidOrder(f"need at least q={q} basis functions, got {h}")
    interior = np.arange(1, h - q + 1) / (h - q + 1)
    return np.concatenate([np.zeros(q), interior, np.ones(q)])


def bspline_basis(knots, q, u):
    """Evaluate all B-splines of order ``q`` on ``knots`` at points ``u``.

    Parameters
    ----------
    knots : array_like
        Nondecreasing extended knot vector with ``H + q`` entries.
    q : int
        Spline order (``q = 4`` is cubic).
    u : array_like
        Evaluation points inside ``[knots[0], knots[-1]]``.

    Returns
    -------
    ndarray of shape ``(len(u), H)``
        At most ``q`` nonzero values per row. The right endpoint is assigned
        to the last nonempty knot span.
    """
    knots = np.asarray(knots, dtype=float)
    q = int(q)
    if q < 1:
        raise InvalidOrder(f"order must be >= 1, got {q}")
    h = knots.size - q
    if h < 1 or np.any(np.diff(knots) < 0):
        raise InvalidOrder("invalid knot vector for the requested order")
    u = np.atleast_1d(np.asarray(u, dtype=float))
    bad = np.flatnonzero(~((u >= knots[0]) & (u <= knots[-1])))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"point {u[i]!r} at index {i} lies outside the knot range", row=i)

    p = q - 1
    # last span with positive length, used for u == knots[-1]
    last = int(np.flatnonzero(knots[:-1] < knots[1:])[-1])
    span = np.searchsorted(knots, u, side="right") - 1
    span = np.clip(span, p, last)

    n = u.size
    vals = np.zeros((n, q))
    vals[:, 0] = 1.0
    left = np.zeros((n, q))
    right = np.zeros((n, q))
    for j in range(1, q):
        left[:, j] = u - knots[span + 1 - j]
        right[:, j] = knots[span + j] - u
        saved = np.zeros(n)
        for r in range(j):
            temp = vals[:, r] / (right[:, r + 1] + left[:, j - r])
            vals[:, r] = saved + right[:, r + 1] * temp
            saved = left[:, j - r] * temp
        vals[:, j] = saved

    out = np.zeros((n, h))
    cols = span[:, None] - p + np.arange(q)[None, :]
    np.put_along_axis(out, cols, vals, axis=1)
    return out


def bspline_eval(knots, q, u):
    """Basis vector at a single scalar ``u``."""
    return bspline_basis(knots, q, [u])[0]


@dataclass(frozen=True)
class BasisSpec:
    """Per-axis basis counts and common order on ``[0, 1]^d``."""

    counts: tuple
    order: int = 4

    def __post_init__(self):
        counts = tuple(int(c) for c in np.atleast_1d(self.counts))
        object.__setattr__(self, "counts", counts)
        if not counts:
            raise ShapeError("need at least one axis")
        if self.order < 1:
            raise InvalidOrder(f"order must be >= 1, got {self.order}")
        for c in counts:
            if c < self.order:
                raise InvalidOrder(f"axis basis count {c} is smaller than the order {self.order}")

    @property
    def d(self):
        return len(self.counts)

    @property
    def h(self):
        return int(np.prod(self.counts))

    @cached_property
    def knots(self):
        return tuple(clamped_knots(c, self.order) for c in self.counts)


def tensor_basis_matrix(spec, locations):
    """Tensor basis rows for an ``(n, d)`` array of locations."""
    locs = np.asarray(locations, dtype=float)
    if locs.ndim == 1:
        locs = locs[None, :] if spec.d > 1 else locs[:, None]
    if locs.ndim != 2 or locs.shape[1] != spec.d:
        raise ShapeError(f"locations must have {spec.d} columns, got shape {locs.shape}")
    bad = np.flatnonzero(~np.all((locs >= 0.0) & (locs <= 1.0), axis=1))
    if bad.size:
        i = int(bad[0])
        raise DomainError(f"location row {i} ({locs[i].tolist()}) is outside [0, 1]^{spec.d}", row=i)
    out = np.ones((locs.shape[0], 1))
    for axis, knots in enumerate(spec.knots):
        b = bspline_basis(knots, spec.order, locs[:, axis])
        out = (out[:, :, None] * b[:, None, :]).reshape(locs.shape[0], -1)
    return out


def tensor_basis(spec, u):
    """Length-``H`` tensor basis vector at a single location ``u``."""
    u = np.atleast_1d(np.asarray(u, dtype=float))
    if u.shape != (spec.d,):
        raise ShapeError(f"location must have {spec.d} coordinates, got shape {u.shape}")
    return tensor_basis_matrix(spec, u[None, :])[0]


@dataclass(frozen=True)
class DesignMatrix:
    """``N x (H * Ptilde)`` matrix; row ``n`` block ``j`` is ``xtilde[n, j] * basis[n]``."""

    matrix: np.ndarray = field(repr=False)
    basis: np.ndarray = field(repr=False)
    h: int

    @property
    def ptilde(self):
        return self.matrix.shape[1] // self.h

    def block(self, j):
        return self.matrix[:, j * self.h:(j + 1) * self.h]


def build_design(locations, xtilde, spec):
    """Assemble the varying-coefficient design matrix."""
    xtilde = np.asarray(xtilde, dtype=float)
    if xtilde.ndim == 1:
        xtilde = xtilde[:, None]
    basis = tensor_basis_matrix(spec, locations)
    if xtilde.shape[0] != basis.shape[0]:
        raise ShapeError(
            f"xtilde has {xtilde.shape[0]} rows but there are {basis.shape[0]} locations"
        )
    n = basis.shape[0]
    matrix = (xtilde[:, :, None] * basis[:, None, :]).reshape(n, -1)
    matrix.setflags(write=False)
    basis.setflags(write=False)
    return DesignMatrix(matrix=matrix, basis=basis, h=spec.h)


def evaluate_surfaces(spec, gamma, locations):
    """``w_j(u) = sum_h B_h(u) gamma_jh`` for each location and coefficient.

    ``gamma`` has length ``H * Ptilde`` (or shape ``(L, H * Ptilde)`` for a
    stack of draws); the result has shape ``(n, Ptilde)`` or ``(L, n, Ptilde)``.
    """
    basis = tensor_basis_matrix(spec, locations)
    gamma = np.asarray(gamma, dtype=float)
    single = gamma.ndim == 1
    g = gamma.reshape(-1, gamma.shape[-1] // spec.h, spec.h) if not single else gamma.reshape(1, -1, spec.h)
    w = np.einsum("nh,ljh->lnj", basis, g)
    return w[0] if single else w
