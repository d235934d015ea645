"""Command-line front end: generate noise, estimate parameters, extract
cluster features, run MSE benchmarks and evaluate the generalized SNR.

Exit codes: 0 success, 2 input/parse error, 3 domain/precondition error,
4 numeric or estimation failure.  Every command is a pure function of its
flags, input files and seed, and writes byte-identical output across runs.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import estimator, features, model, sampler
from .mathcore import AccuracyError, NotPositiveDefiniteError, RandomStream, SpdMatrix

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_DOMAIN = 3
EXIT_NUMERIC = 4


class ParamsFileError(ValueError):
    """Parse failure with file/line/field context in the message."""


def _fmt(x):
    return format(float(x), ".17g")


# ---------------------------------------------------------------------------
# parameter files: plain "key = value" lines, '#' comments

def parse_params_text(text, name="<params>"):
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ParamsFileError(f"{name}:{lineno}: expected 'key = value'")
        key, _, val = line.partition("=")
        key = key.strip()
        val = val.strip()
        if key in values:
            raise ParamsFileError(f"{name}:{lineno}: duplicate key {key!r}")
        values[(key)] = (lineno, val)
    return values


def _take(values, key, conv, name, required=True, default=None):
    if key not in values:
        if required:
            raise ParamsFileError(f"{name}: missing required key {key!r}")
        return default
    lineno, raw = values.pop(key)
    try:
        return conv(raw)
    except ValueError as exc:
        raise ParamsFileError(f"{name}:{lineno}: invalid value for {key!r}: {raw!r} ({exc})")


def read_params_file(path):
    """Parse a GS parameter file; returns (GsParams, seed or None)."""
    name = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParamsFileError(f"{name}: {exc.strerror or exc}")
    values = parse_params_text(text, name)
    p = _take(values, "p", int, name)
    if p < 1:
        raise ParamsFileError(f"{name}: p must be a positive integer, got {p}")
    alpha = _take(values, "alpha", float, name)
    gamma_g = _take(values, "gamma_g", float, name)
    gamma_s = _take(values, "gamma_s", float, name)
    rho = _take(values, "rho", float, name)
    st_line, st_raw = values.pop("sigma_tilde", (None, None))
    if st_raw is None:
        if p == 1:
            st = np.eye(1)
        else:
            raise ParamsFileError(f"{name}: missing required key 'sigma_tilde'")
    else:
        try:
            flat = np.array([float(v) for v in st_raw.split()])
        except ValueError:
            raise ParamsFileError(f"{name}:{st_line}: sigma_tilde entries must be numbers")
        if flat.size != p * p:
            raise ParamsFileError(
                f"{name}:{st_line}: sigma_tilde needs p*p = {p * p} entries, got {flat.size}"
            )
        st = flat.reshape(p, p)
    seed = _take(values, "seed", int, name, required=False)
    if values:
        stray = sorted(values)[0]
        raise ParamsFileError(f"{name}:{values[stray][0]}: unknown key {stray!r}")
    try:
        params = model.GsParams(alpha, gamma_g, gamma_s, rho, SpdMatrix(st))
    except (ValueError, NotPositiveDefiniteError) as exc:
        raise ParamsFileError(f"{name}: {exc}")
    return params, seed


def write_params_file(path, params, seed=None):
    lines = [
        f"alpha = {_fmt(params.alpha)}",
        f"gamma_g = {_fmt(params.gamma_g)}",
        f"gamma_s = {_fmt(params.gamma_s)}",
        f"rho = {_fmt(params.rho)}",
        f"p = {params.p}",
        "sigma_tilde = " + " ".join(_fmt(v) for v in params.sigma_tilde.entries.ravel()),
    ]
    if seed is not None:
        lines.append(f"seed = {int(seed)}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# sample files: text (one value per line) or raw little-endian float64

def _is_binary(path):
    return str(path).endswith(".f64")


def write_samples(path, samples):
    x = np.asarray(samples, dtype=np.float64)
    if _is_binary(path):
        x.astype("<f8").tofile(path)
    else:
        with open(path, "w") as fh:
            for v in x:
                fh.write(_fmt(v) + "\n")


def read_samples(path):
    name = str(path)
    try:
        if _is_binary(path):
            size = Path(path).stat().st_size
            if size % 8:
                raise ParamsFileError(f"{name}: byte length {size} not divisible by 8")
            x = np.fromfile(path, dtype="<f8")
        else:
            with open(path) as fh:
                rows = [line.strip() for line in fh if line.strip()]
            x = np.array([float(v) for v in rows], dtype=np.float64)
    except OSError as exc:
        raise ParamsFileError(f"{name}: {exc.strerror or exc}")
    except ValueError as exc:
        raise ParamsFileError(f"{name}: {exc}")
    if x.size == 0:
        raise ParamsFileError(f"{name}: no samples found")
    if not np.isfinite(x).all():
        raise ParamsFileError(f"{name}: non-finite sample values")
    return x


# ---------------------------------------------------------------------------
# commands

def _cmd_generate(args):
    params, file_seed = read_params_file(args.params)
    seed = args.seed if args.seed is not None else (file_seed if file_seed is not None else 0)
    rng = RandomStream(seed, args.stream)
    n = args.n
    if n < 1:
        raise ValueError("sample count must be positive")
    if args.model == "gs":
        if n < params.p:
            raise ValueError(f"sample count {n} smaller than memory order p={params.p}")
        seq = sampler.sample_gs_sequence(params, n, rng)
    elif args.model == "wgn":
        seq = sampler.sample_wgn(params.gamma_g, n, rng)
    else:
        if n < params.p:
            raise ValueError(f"sample count {n} smaller than memory order p={params.p}")
        seq = sampler.sample_asg_sequence(params.alpha, params.sigma, n, rng)
    write_samples(args.out, seq.samples)
    return EXIT_OK


def _cmd_estimate(args):
    x = read_samples(args.infile)
    cfg = estimator.EstimationConfig(cov_threshold=args.threshold)
    report = estimator.estimate_all(x, cfg)
    doc = report.to_dict()
    with open(args.out, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _cmd_features(args):
    x = read_samples(args.infile)
    spec = features.HistogramSpec(bins=args.bins)
    feats = features.extract_features(x, a_t=args.threshold, bins=spec)
    with open(args.out, "w") as fh:
        fh.write("amplitude_bin_lo,amplitude_bin_hi,density\n")
        for lo, hi, d in zip(feats.bin_edges[:-1], feats.bin_edges[1:], feats.densities):
            fh.write(f"{_fmt(lo)},{_fmt(hi)},{_fmt(d)}\n")
        fh.write("\nicl_length,mass\n")
        for k, v in feats.icl_pmf().items():
            fh.write(f"{k},{_fmt(v)}\n")
        fh.write("\ncil_length,mass\n")
        for k, v in feats.cil_pmf().items():
            fh.write(f"{k},{_fmt(v)}\n")
    return EXIT_OK


def _cmd_gsnr(args):
    params, _ = read_params_file(args.params)
    value = model.gsnr_db(params, args.signal_power)
    print(_fmt(value))
    return EXIT_OK


def read_bench_config(path):
    name = str(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParamsFileError(f"{name}: {exc.strerror or exc}")
    values = parse_params_text(text, name)

    def floats(raw):
        return [float(v) for v in raw.split()]

    alphas = _take(values, "alphas", floats, name)
    rhos = _take(values, "rhos", floats, name)
    samples = _take(values, "samples", int, name)
    seed = _take(values, "seed", int, name, required=False, default=0)
    gamma_g = _take(values, "gamma_g", float, name)
    gamma_s = _take(values, "gamma_s", float, name)
    p = _take(values, "p", int, name)
    _, st_raw = values.pop("sigma_tilde", (None, None))
    if st_raw is None:
        raise ParamsFileError(f"{name}: missing required key 'sigma_tilde'")
    flat = np.array([float(v) for v in st_raw.split()])
    if flat.size != p * p:
        raise ParamsFileError(f"{name}: sigma_tilde needs {p * p} entries, got {flat.size}")
    st = SpdMatrix(flat.reshape(p, p))
    return dict(alphas=alphas, rhos=rhos, samples=samples, seed=seed,
                gamma_g=gamma_g, gamma_s=gamma_s, sigma_tilde=st)


def _cmd_mse_bench(args):
    cfgdoc = read_bench_config(args.config)
    cfg = estimator.EstimationConfig()
    rows = []
    base = RandomStream(cfgdoc["seed"])
    combo = 0
    for alpha in cfgdoc["alphas"]:
        for rho in cfgdoc["rhos"]:
            params = model.GsParams(alpha, cfgdoc["gamma_g"], cfgdoc["gamma_s"],
                                    rho, cfgdoc["sigma_tilde"])
            combo += 1
            res = estimator.mse_benchmark(
                params, rounds=args.rounds, samples_per_round=cfgdoc["samples"],
                cfg=cfg, rng=base.substream(10_000 * combo), workers=args.workers,
            )
            rows.append((alpha, rho, res))
    with open(args.out, "w") as fh:
        fh.write("alpha,rho,mse_p,mse_sigma,mse_rho,mse_gamma_g,mse_alpha,"
                 "mse_gamma_s,rounds,failures\n")
        for alpha, rho, res in rows:
            fails = sum(res.failures.values())
            fh.write(
                f"{_fmt(alpha)},{_fmt(rho)},"
                + ",".join(_fmt(res.mse[k]) if not math.isnan(res.mse[k]) else "nan"
                           for k in ("p", "sigma", "rho", "gamma_g", "alpha", "gamma_s"))
                + f",{res.rounds},{fails}\n"
            )
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(
        prog="gsnoise",
        description="Bursty mixed Gaussian-impulsive noise toolkit",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="generate a noise sequence")
    g.add_argument("--params", required=True)
    g.add_argument("--n", type=int, required=True)
    g.add_argument("--seed", type=int, default=None)
    g.add_argument("--stream", type=int, default=0)
    g.add_argument("--model", choices=("gs", "wgn", "asg"), default="gs")
    g.add_argument("--out", required=True)
    g.set_defaults(func=_cmd_generate)

    e = sub.add_parser("estimate", help="estimate GS parameters from samples")
    e.add_argument("--in", dest="infile", required=True)
    e.add_argument("--threshold", type=float, default=0.1)
    e.add_argument("--out", required=True)
    e.set_defaults(func=_cmd_estimate)

    f = sub.add_parser("features", help="extract amplitude/ICL/CIL features")
    f.add_argument("--in", dest="infile", required=True)
    f.add_argument("--threshold", type=float, default=None)
    f.add_argument("--bins", type=int, default=1000)
    f.add_argument("--out", required=True)
    f.set_defaults(func=_cmd_features)

    m = sub.add_parser("mse-bench", help="MSE benchmark over an (alpha, rho) grid")
    m.add_argument("--config", required=True)
    m.add_argument("--rounds", type=int, default=50)
    m.add_argument("--workers", type=int, default=1)
    m.add_argument("--out", required=True)
    m.set_defaults(func=_cmd_mse_bench)

    s = sub.add_parser("gsnr", help="generalized SNR in dB for a parameter file")
    s.add_argument("--params", required=True)
    s.add_argument("--signal-power", type=float, required=True)
    s.set_defaults(func=_cmd_gsnr)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INPUT if exc.code not in (0, None) else EXIT_OK
    try:
        return args.func(args)
    except ParamsFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except estimator.EstimationError as exc:
        print(f"estimation failure in stage '{exc.stage}': {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except AccuracyError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, NotPositiveDefiniteError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
