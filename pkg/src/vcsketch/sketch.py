"""Data-oblivious random compression matrices and their application.

A sketch is an ``M x N`` matrix ``phi`` drawn independently of the data. It
is materialized in memory for the duration of a run, but only
``(scheme, seed, M, N)`` need to be persisted because regeneration is
bit-identical.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidCompressionSize, NumericError, ShapeError
from .rng import substream

SCHEMES = ("gaussian", "clarkson_woodruff", "identity_test", "explicit")

# domain-separation tag so sketch streams never coincide with sampler streams
_SKETCH_STREAM = 0x5EED_5CE7

DEFAULT_BLOCK = 4096


def _check_sizes(n, m):
    if int(m) != m or int(n) != n:
        raise InvalidCompressionSize(f"sizes must be integers, got m={m}, n={n}")
    if m < 1:
        raise InvalidCompressionSize(f"compressed size must be >= 1, got m={m}")
    if m >= n:
        raise InvalidCompressionSize(
            f"compressed size must be smaller than the sample size, got m={m}, n={n}"
        )


def _check_seed(seed):
    seed = int(seed)
    if not 0 <= seed < 2**64:
        raise ValueError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return seed


@dataclass(frozen=True)
class SketchMatrix:
    """An ``rows x cols`` compression matrix plus how it was generated."""

    scheme: str
    seed: int | None
    rows: int
    cols: int
    entries: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown sketch scheme {self.scheme!r}")
        if self.entries.shape != (self.rows, self.cols):
            raise ShapeError(
                f"entries have shape {self.entries.shape}, expected {(self.rows, self.cols)}"
            )
        self.entries.setflags(write=False)

    @classmethod
    def from_array(cls, entries):
        """Wrap a hand-built matrix (tests and experiments only)."""
        arr = np.array(entries, dtype=float)
        if arr.ndim != 2:
            raise ShapeError("sketch entries must be a 2-D array")
        return cls("explicit", None, arr.shape[0], arr.shape[1], arr)

    def metadata(self):
        return {"scheme": self.scheme, "seed": self.seed, "rows": self.rows, "cols": self.cols}

    def regenerate(self):
        return regenerate(self.scheme, self.seed, self.rows, self.cols)


def gaussian_sketch(n, m, seed):
    """Dense sketch with i.i.d. ``N(0, 1/n)`` entries."""
    _check_sizes(n, m)
    seed = _check_seed(seed)
    rng = substream(_SKETCH_STREAM, 0, seed, m, n)
    entries = rng.standard_normal((m, n)) / np.sqrt(n)
    return SketchMatrix("gaussian", seed, int(m), int(n), entries)


def clarkson_woodruff_sketch(n, m, seed):
    """Sparse-embedding sketch: one uniformly signed ``+-1`` per column.

    Entries are stored unscaled, so ``E[phi.T @ phi] = I_n`` and
    ``E[phi @ phi.T] = (n / m) I_m``.
    """
    _check_sizes(n, m)
    seed = _check_seed(seed)
    rng = substream(_SKETCH_STREAM, 1, seed, m, n)
    rows = rng.integers(0, m, size=n)
    signs = rng.choice(np.array([-1.0, 1.0]), size=n)
    entries = np.zeros((m, n))
    entries[rows, np.arange(n)] = signs
    return SketchMatrix("clarkson_woodruff", seed, int(m), int(n), entries)


def identity_sketch(n):
    """``I_n``; lets the uncompressed model reuse the compressed code path."""
    n = int(n)
    if n < 1:
        raise InvalidCompressionSize(f"sample size must be >= 1, got n={n}")
    return SketchMatrix("identity_test", 0, n, n, np.eye(n))


def regenerate(scheme, seed, m, n):
    if scheme == "gaussian":
        return gaussian_sketch(n, m, seed)
    if scheme == "clarkson_woodruff":
        return clarkson_woodruff_sketch(n, m, seed)
    if scheme == "identity_test":
        if m != n:
            raise InvalidCompressionSize("identity_test sketch requires m == n")
        return identity_sketch(n)
    raise ValueError(f"scheme {scheme!r} cannot be regenerated from a seed")


def make_sketch(scheme, n, m, seed):
    """Build a sketch by scheme name."""
    return regenerate(scheme, seed, m, n)


@dataclass(frozen=True)
class CompressedData:
    """Sketched response, static predictors and varying-coefficient design."""

    y_phi: np.ndarray
    X_phi: np.ndarray
    Z_phi: np.ndarray
    n: int
    h: int
    sketch: dict

    def __post_init__(self):
        m = self.y_phi.shape[0]
        if self.X_phi.shape[0] != m or self.Z_phi.shape[0] != m:
            raise ShapeError("compressed arrays disagree on the number of rows")
        if self.h < 1 or self.Z_phi.shape[1] % self.h:
            raise ShapeError(
                f"design width {self.Z_phi.shape[1]} is not a multiple of h={self.h}"
            )
        for arr in (self.y_phi, self.X_phi, self.Z_phi):
            arr.setflags(write=False)

    @property
    def m(self):
        return self.y_phi.shape[0]

    @property
    def p(self):
        return self.X_phi.shape[1]

    @property
    def ptilde(self):
        return self.Z_phi.shape[1] // self.h


def sketch_product(phi, A, block=DEFAULT_BLOCK):
    """``phi @ A`` accumulated over column blocks of ``phi`` in fixed order."""
    entries = phi.entries if isinstance(phi, SketchMatrix) else np.asarray(phi)
    A = np.asarray(A, dtype=float)
    vector = A.ndim == 1
    if vector:
        A = A[:, None]
    if A.shape[0] != entries.shape[1]:
        raise ShapeError(
            f"sketch has {entries.shape[1]} columns but input has {A.shape[0]} rows"
        )
    out = np.zeros((entries.shape[0], A.shape[1]))
    for start in range(0, A.shape[0], block):
        stop = start + block
        out += entries[:, start:stop] @ A[start:stop]
    return out[:, 0] if vector else out


def apply_sketch(phi, y, X, design):
    """Compress ``(y, X, design)`` with ``phi``.

    ``design`` is a :class:`vcsketch.basis.DesignMatrix` (or any object with
    ``matrix`` and ``h`` attributes). An identity sketch returns copies of the
    inputs unchanged.
    """
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    Z = np.asarray(design.matrix, dtype=float)
    n = phi.cols
    for name, arr in (("y", y), ("X", X), ("design", Z)):
        if arr.shape[0] != n:
            raise ShapeError(f"{name} has {arr.shape[0]} rows, sketch expects {n}")
    if phi.scheme == "identity_test":
        y_phi, X_phi, Z_phi = y.copy(), X.copy(), Z.copy()
    else:
        y_phi = sketch_product(phi, y)
        X_phi = sketch_product(phi, X) if X.shape[1] else np.zeros((phi.rows, 0))
        Z_phi = sketch_product(phi, Z)
    return CompressedData(y_phi, X_phi, Z_phi, n=n, h=design.h, sketch=phi.metadata())


def sketch_spectrum(phi):
    """Smallest and largest eigenvalues of ``phi @ phi.T``."""
    entries = phi.entries
    if not np.all(np.isfinite(entries)):
        raise NumericError("sketch contains non-finite entries")
    gram = entries @ entries.T
    evals = np.linalg.eigvalsh(gram)
    return float(evals[0]), float(evals[-1])


def gram_deviation(phi):
    """Frobenius norm of ``phi @ phi.T - I``."""
    gram = phi.entries @ phi.entries.T
    return float(np.linalg.norm(gram - np.eye(phi.rows)))
