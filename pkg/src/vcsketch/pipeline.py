"""End-to-end helpers: build the design, sketch, fit, evaluate."""

import math
import time
from dataclasses import dataclass, field

from .basis import BasisSpec, build_design
from .diagnostics import chain_report, interval_metrics, mse_vc, mspe
from .errors import InvalidCompressionSize
from .model import Priors
from .predict import PredictionRequest, interval_summary, predict, reconstruct_w
from .rng import substream
from .sampler import ChainConfig, run_gibbs
from .sketch import apply_sketch, identity_sketch, make_sketch


def default_m(n):
    """Default compressed size ``ceil(10 sqrt(n))``."""
    return math.ceil(10.0 * math.sqrt(n))


@dataclass
class Fit:
    draws: object
    spec: BasisSpec
    sketch: dict
    timings: dict = field(default_factory=dict)


def compress(data, spec, m=None, scheme="gaussian", sketch_seed=0, uncompressed=False):
    """Build the design matrix and apply the sketch; returns ``(CompressedData, timings)``."""
    timings = {}
    t0 = time.perf_counter()
    design = build_design(data.locations, data.xtilde, spec)
    timings["design"] = time.perf_counter() - t0
    t0 = time.perf_counter()
    if uncompressed:
        phi = identity_sketch(data.n)
    else:
        m = default_m(data.n) if m is None else int(m)
        if m >= data.n:
            raise InvalidCompressionSize(
                f"compressed size m={m} must be smaller than n={data.n}; use the uncompressed fit"
            )
        phi = make_sketch(scheme, data.n, m, sketch_seed)
    compressed = apply_sketch(phi, data.y, data.X, design)
    timings["sketch"] = time.perf_counter() - t0
    return compressed, timings


def fit(data, spec, priors=None, config=None, m=None, scheme="gaussian",
        sketch_seed=0, uncompressed=False, chain=0):
    priors = priors or Priors()
    config = config or ChainConfig()
    compressed, timings = compress(data, spec, m, scheme, sketch_seed, uncompressed)
    draws = run_gibbs(compressed, priors, config, chain=chain)
    timings["sampling"] = draws.seconds
    return Fit(draws=draws, spec=spec, sketch=compressed.sketch, timings=timings)


def evaluate(result, train=None, w_train=None, test=None, predict_seed=0, level=0.95):
    """Metric report with whatever truth is available.

    ``w_train`` (``n x Ptilde`` true surfaces at ``train`` locations) enables
    the coefficient metrics; ``test`` (held-out data with responses) enables
    the predictive ones.
    """
    report = chain_report(result.draws)
    if w_train is not None:
        w = reconstruct_w(result.draws, train.locations, result.spec)
        med, lo, hi = interval_summary(w, level)
        report.mse_vc = mse_vc(med, w_train)
        report.ci_coverage, report.ci_length = interval_metrics(lo, hi, w_train)
    if test is not None:
        pred = predict(result.draws, PredictionRequest.from_dataset(test), result.spec,
                       substream(predict_seed, 0x9E3D))
        report.mspe = mspe(pred.median, test.y)
        report.pi_coverage, report.pi_length = interval_metrics(pred.lower, pred.upper, test.y)
    return report


def surface_summary(draws, locations, spec, level=0.95):
    """Posterior median and interval of each surface, each ``n x Ptilde``."""
    return interval_summary(reconstruct_w(draws, locations, spec), level)

