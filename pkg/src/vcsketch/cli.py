"""Command-line interface: ``vcsketch simulate|fit|predict|diagnose``."""

import argparse
import platform
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import config as cfg
from .basis import BasisSpec
from .diagnostics import MetricReport, chain_report, interval_metrics, mse_vc, mspe
from .errors import ConfigError, IngestionError, InvalidCompressionSize, VCSketchError
from .io import (
    digests, load_dataset, predictor_names, read_draws, read_manifest, read_table,
    read_truth, write_dataset, write_draws, write_manifest, write_truth,
)
from .model import Priors
from .pipeline import compress, default_m
from .predict import PredictionRequest, interval_summary, predict, reconstruct_w, write_summary_csv
from .rng import substream
from .sampler import ChainConfig, pool_draws, run_chains
from .simgen import SimConfig, simulate

PREDICT_STREAM = 0x9E3D
MANIFEST = "manifest.json"


def _software():
    return {"vcsketch": __version__, "numpy": np.__version__, "python": platform.python_version()}


def cmd_simulate(config_path, out_dir, seed=None):
    values = cfg.load_simulate(config_path)
    if seed is not None:
        values["seed"] = seed
    try:
        sim = SimConfig(
            n=values["N"], n_test=values["N_test"], d=values["d"], delta2=values["delta2"],
            phi=values["phi"], noise_var=values["noise_var"], seed=values["seed"],
            max_dense=values["max_dense"],
        )
    except ValueError as exc:
        raise ConfigError(f"{config_path}: {exc}") from None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    t0 = time.perf_counter()
    train, test, truth = simulate(sim)
    elapsed = time.perf_counter() - t0

    outputs = [out / "train.csv", out / "test.csv", out / "truth.csv"]
    write_dataset(outputs[0], train)
    if test is not None:
        write_dataset(outputs[1], test)
    else:
        outputs[1].write_text("")
    sets = [("train", train.locations, truth.w_train)]
    if test is not None:
        sets.append(("test", test.locations, truth.w_test))
    write_truth(outputs[2], sets)
    write_manifest(out / MANIFEST, {
        "command": "simulate",
        "config": values,
        "seeds": {"simulation": values["seed"]},
        "software": _software(),
        "timings": {"simulate": elapsed},
        "inputs": digests([config_path]),
        "outputs": digests(outputs, out),
    })
    return outputs


def _priors(values, p):
    try:
        if values["beta_prior"] == "normal" and p:
            return Priors(values["a_sigma"], values["b_sigma"], values["a_tau"], values["b_tau"],
                          flat_beta=False, beta_mean=np.full(p, values["beta_mean"]),
                          beta_cov=values["beta_var"] * np.eye(p))
        return Priors(values["a_sigma"], values["b_sigma"], values["a_tau"], values["b_tau"])
    except ValueError as exc:
        raise ConfigError(f"invalid prior settings: {exc}") from None


def _chain_config(values):
    try:
        return ChainConfig(iterations=values["iterations"], burn_in=values["burn_in"],
                           thin=values["thin"], seed=values["seed"],
                           gamma_sampler=values["gamma_sampler"])
    except ValueError as exc:
        raise ConfigError(f"invalid chain settings: {exc}") from None


def _columns(values, header, data_path):
    static = list(values["static"])
    varying = values.get("varying")
    if varying is None:
        varying = [c for c in predictor_names(header) if c not in static]
    return list(varying), static


def cmd_fit(data_path, config_path, out_dir, seed=None, uncompressed=False, chains=1):
    values = cfg.load_fit(config_path)
    if seed is not None:
        values["seed"] = seed
    values.setdefault("sketch_seed", values["seed"])
    header, _ = read_table(data_path)
    varying, static = _columns(values, header, data_path)
    data = load_dataset(data_path, varying, static, values["intercept"])
    spec = BasisSpec(cfg.axis_counts(values, data.d), values["q"])
    priors = _priors(values, data.p)
    chain_config = _chain_config(values)
    if chains < 1:
        raise ConfigError("--chains must be >= 1")

    m = data.n if uncompressed else values.get("M", default_m(data.n))
    if not uncompressed and m >= data.n:
        raise InvalidCompressionSize(
            f"M={m} must be smaller than N={data.n}; pass --uncompressed to fit the full data"
        )
    compressed, timings = compress(data, spec, m, values["scheme"], values["sketch_seed"], uncompressed)
    all_draws = run_chains(compressed, priors, chain_config, chains)

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    outputs = []
    for draws in all_draws:
        target = out if chains == 1 else out / f"chain_{draws.chain}"
        outputs += write_draws(target, draws)
        outputs += _write_report(target, chain_report(draws))
    if chains > 1:
        outputs += _write_report(out, combined_report(all_draws))
    timings["sampling"] = [d.seconds for d in all_draws]

    resolved = dict(values, varying=varying, static=static, M=m, H=list(spec.counts))
    write_manifest(out / MANIFEST, {
        "command": "fit",
        "uncompressed": uncompressed,
        "config": resolved,
        "data": str(data_path),
        "d": data.d,
        "basis": {"counts": list(spec.counts), "order": spec.order},
        "sketch": compressed.sketch,
        "seeds": {"chain": values["seed"], "sketch": values["sketch_seed"]},
        "chains": chains,
        "software": _software(),
        "timings": timings,
        "inputs": digests([data_path] + ([config_path] if config_path else [])),
        "outputs": digests(outputs, out),
    })
    return all_draws


def _write_report(target, report):
    target.mkdir(parents=True, exist_ok=True)
    paths = [target / "report.txt", target / "report.csv", target / "parameters.csv"]
    paths[0].write_text(report.to_text())
    paths[1].write_text(report.to_csv())
    paths[2].write_text(report.parameters_csv())
    return paths


def combined_report(draws_list):
    """Pool chains: ESS adds across chains, times add as sequential work."""
    reports = [chain_report(d) for d in draws_list]
    pooled = pool_draws(draws_list)
    names, arr = pooled.scalar_chains()
    out = MetricReport(n_draws=pooled.n_draws, seconds=pooled.seconds)
    for name, col in zip(names, arr.T):
        e = sum(r.ess[name] for r in reports)
        out.ess[name] = e
        out.mcse[name] = float(np.std(col, ddof=1) / np.sqrt(e))
    return out


def load_fit_dir(draws_dir):
    """Manifest, basis spec and per-chain draws from a fit output directory."""
    draws_dir = Path(draws_dir)
    manifest = read_manifest(draws_dir / MANIFEST)
    if manifest.get("command") != "fit":
        raise IngestionError(f"{draws_dir}: not a fit output directory")
    spec = BasisSpec(tuple(manifest["basis"]["counts"]), manifest["basis"]["order"])
    seconds = manifest["timings"]["sampling"]
    chains = manifest["chains"]
    dirs = [draws_dir] if chains == 1 else [draws_dir / f"chain_{c}" for c in range(chains)]
    draws = [read_draws(d, seconds=seconds[c], seed=manifest["seeds"]["chain"], chain=c,
                        config=manifest["config"]) for c, d in enumerate(dirs)]
    return manifest, spec, draws


def _request(manifest, path, require_y=False):
    conf = manifest["config"]
    data = load_dataset(path, conf["varying"], conf["static"], conf["intercept"], require_y=require_y)
    if data.d != manifest["d"]:
        raise IngestionError(f"{path}: expected {manifest['d']} location columns, got {data.d}")
    return data


def cmd_predict(draws_dir, locations_path, out_path, seed=None):
    manifest, spec, draws = load_fit_dir(draws_dir)
    data = _request(manifest, locations_path)
    pooled = pool_draws(draws)
    seed = manifest["seeds"]["chain"] if seed is None else seed
    pred = predict(pooled, PredictionRequest.from_dataset(data), spec, substream(seed, PREDICT_STREAM))
    Path(out_path).parent.mkdir(parents=True, exist_ok=True)
    write_summary_csv(out_path, data.locations, pred)
    return pred


def cmd_diagnose(draws_dir, truth_path=None, test_path=None, out_dir=None, seed=None):
    manifest, spec, draws = load_fit_dir(draws_dir)
    report = chain_report(draws[0]) if len(draws) == 1 else combined_report(draws)
    pooled = pool_draws(draws)
    if truth_path is not None:
        locs, w_true = read_truth(truth_path)
        w = reconstruct_w(pooled, locs, spec)
        if w.shape[2] != w_true.shape[1]:
            raise IngestionError(
                f"{truth_path}: truth has {w_true.shape[1]} coefficients, model has {w.shape[2]}"
            )
        med, lo, hi = interval_summary(w)
        report.mse_vc = mse_vc(med, w_true)
        report.ci_coverage, report.ci_length = interval_metrics(lo, hi, w_true)
    if test_path is not None:
        test = _request(manifest, test_path, require_y=True)
        seed = manifest["seeds"]["chain"] if seed is None else seed
        pred = predict(pooled, PredictionRequest.from_dataset(test), spec, substream(seed, PREDICT_STREAM))
        report.mspe = mspe(pred.median, test.y)
        report.pi_coverage, report.pi_length = interval_metrics(pred.lower, pred.upper, test.y)
    out = Path(out_dir) if out_dir is not None else Path(draws_dir) / "diagnose"
    _write_report(out, report)
    return report


def build_parser():
    parser = argparse.ArgumentParser(prog="vcsketch", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic dataset")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("fit", help="fit the compressed (or uncompressed) model")
    p.add_argument("data")
    p.add_argument("--config")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.add_argument("--uncompressed", action="store_true")
    p.add_argument("--chains", type=int, default=1)

    p = sub.add_parser("predict", help="posterior predictive summaries at new locations")
    p.add_argument("draws")
    p.add_argument("locations")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)

    p = sub.add_parser("diagnose", help="chain and accuracy metrics")
    p.add_argument("draws")
    p.add_argument("--truth")
    p.add_argument("--test")
    p.add_argument("--out")
    p.add_argument("--seed", type=int)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            outputs = cmd_simulate(args.config, args.out, args.seed)
            print("\n".join(str(o) for o in outputs))
        elif args.command == "fit":
            draws = cmd_fit(args.data, args.config, args.out, args.seed, args.uncompressed, args.chains)
            report = chain_report(draws[0]) if len(draws) == 1 else combined_report(draws)
            sys.stdout.write(report.to_text())
        elif args.command == "predict":
            cmd_predict(args.draws, args.locations, args.out, args.seed)
            print(args.out)
        elif args.command == "diagnose":
            report = cmd_diagnose(args.draws, args.truth, args.test, args.out, args.seed)
            sys.stdout.write(report.to_text())
    except VCSketchError as exc:
        print(f"vcsketch: error[{exc.category}]: {exc}", file=sys.stderr)
        return exc.exit_code
    except OSError as exc:
        print(f"vcsketch: error[io]: {exc}", file=sys.stderr)
        return 11
    return 0


if __name__ == "__main__":
    sys.exit(main())
