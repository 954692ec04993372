"""Chain diagnostics and accuracy metrics."""

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateChainError, InvalidInterval, ShapeError


def autocorrelation(chain):
    """Sample autocorrelation at all lags (FFT, biased normalization)."""
    x = np.asarray(chain, dtype=float)
    n = x.size
    x = x - x.mean()
    size = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(x, size)
    acov = np.fft.irfft(f * np.conj(f), size)[:n] / n
    return acov / acov[0]


def ess(chain):
    """Effective sample size with Geyer's initial positive sequence.

    Autocorrelations are summed in adjacent pairs while the pair sums stay
    positive. The result is clipped to ``(0, L]``.
    """
    x = np.asarray(chain, dtype=float)
    if x.ndim != 1:
        raise ShapeError("ess expects a 1-D chain")
    n = x.size
    if n < 10:
        raise DegenerateChainError(f"chain too short for ESS ({n} < 10)")
    if not np.var(x) > 0:
        raise DegenerateChainError("chain has zero variance")
    rho = autocorrelation(x)
    total = 0.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair <= 0:
            break
        total += pair
    tau = 2.0 * total - 1.0
    return float(min(n, n / tau)) if tau > 0 else float(n)


def mcse(chain):
    """Monte Carlo standard error of the chain mean."""
    x = np.asarray(chain, dtype=float)
    return float(np.std(x, ddof=1) / np.sqrt(ess(x)))


def _matching(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise ShapeError(f"shape mismatch: {a.shape} vs {b.shape}")
    return a, b


def mse_vc(w_hat, w_true):
    """Mean squared error over every (location, coefficient) pair."""
    a, b = _matching(w_hat, w_true)
    return float(np.mean((a - b) ** 2))


def mspe(pred_median, y_held_out):
    a, b = _matching(pred_median, y_held_out)
    return float(np.mean((a - b) ** 2))


def interval_metrics(lower, upper, truth):
    """Empirical coverage and mean length of intervals."""
    lo, hi = _matching(lower, upper)
    lo, t = _matching(lo, truth)
    if np.any(lo > hi):
        i = int(np.flatnonzero(lo.ravel() > hi.ravel())[0])
        raise InvalidInterval(f"interval {i} has lower > upper")
    covered = (t >= lo) & (t <= hi)
    return float(np.mean(covered)), float(np.mean(hi - lo))


def efficiency(mean_ess, seconds):
    """``log2(ESS / seconds)``."""
    return float(np.log2(mean_ess / seconds))


SCALAR_KEYS = (
    "n_draws", "seconds", "ess_mean", "ess_min", "mcse_max", "efficiency",
    "mse_vc", "ci_length", "ci_coverage", "mspe", "pi_length", "pi_coverage",
)


@dataclass
class MetricReport:
    """Summary metrics; truth-dependent entries stay ``None`` when unavailable."""

    n_draws: int
    seconds: float
    ess: dict = field(default_factory=dict)
    mcse: dict = field(default_factory=dict)
    mse_vc: float | None = None
    ci_length: float | None = None
    ci_coverage: float | None = None
    mspe: float | None = None
    pi_length: float | None = None
    pi_coverage: float | None = None

    @property
    def ess_mean(self):
        return float(np.mean(list(self.ess.values())))

    @property
    def ess_min(self):
        return float(min(self.ess.values()))

    @property
    def mcse_max(self):
        return float(max(self.mcse.values()))

    @property
    def efficiency(self):
        return efficiency(self.ess_mean, self.seconds)

    def scalars(self):
        """Ordered key/value pairs; absent metrics are omitted."""
        out = {}
        for key in SCALAR_KEYS:
            value = getattr(self, key)
            if value is not None:
                out[key] = value
        return out

    def to_text(self):
        return "".join(f"{k} = {_fmt(v)}\n" for k, v in self.scalars().items())

    def to_csv(self):
        items = self.scalars()
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(items.keys())
        w.writerow(_fmt(v) for v in items.values())
        return buf.getvalue()

    def parameters_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["parameter", "ess", "mcse"])
        for name, value in self.ess.items():
            w.writerow([name, _fmt(value), _fmt(self.mcse[name])])
        return buf.getvalue()


def _fmt(v):
    return str(v) if isinstance(v, (int, np.integer)) else repr(float(v))


def chain_report(draws):
    """ESS and MCSE for every scalar parameter of a :class:`PosteriorDraws`."""
    names, arr = draws.scalar_chains()
    report = MetricReport(n_draws=draws.n_draws, seconds=float(draws.seconds))
    for name, col in zip(names, arr.T):
        e = ess(col)
        report.ess[name] = e
        report.mcse[name] = float(np.std(col, ddof=1) / np.sqrt(e))
    return report
