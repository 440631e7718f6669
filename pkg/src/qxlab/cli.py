"""Command-line front door.

stdout carries only machine-readable output (newline-delimited JSON or
CSV); progress goes to stderr. Exit codes: 0 success / QE, 2 input or
config error, 3 not QE, 4 too few certified separation runs.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import qe
from .haar import load_tuple, sample_tuple, save_tuple
from .separation import build_xy, certify_separation, check_b12_estimate, concentration_scan, moment_match
from .spectral import DEFAULT_MAX_ITER, DEFAULT_TOL, commutant_gap, expander_epsilon, lambda2

log = logging.getLogger("qxlab")

EXIT_OK, EXIT_CONFIG, EXIT_NOT_QE, EXIT_UNCERTIFIED = 0, 2, 3, 4


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    subcommand: str
    n_list: list[int] = field(default_factory=list)
    d: int = 3
    seeds: list[int] = field(default_factory=lambda: [0])
    tolerances: dict[str, float] = field(default_factory=dict)
    output_path: str | None = None
    format: str = "json"
    deterministic: bool = False
    jobs: int = 1

    def validate(self, numeric: bool = True) -> None:
        if numeric and not self.n_list:
            raise ConfigError("--n must list at least one size")
        if not self.seeds:
            raise ConfigError("--seeds must list at least one seed")
        if self.format not in ("json", "csv"):
            raise ConfigError(f"unknown format {self.format!r}")
        if self.jobs < 1:
            raise ConfigError("--jobs must be >= 1")


def parse_int_list(text: str) -> list[int]:
    """``"64,128"``, ``"1..5"`` or a mix of both."""
    out: list[int] = []
    for part in str(text).split(","):
        part = part.strip()
        if not part:
            continue
        try:
            if ".." in part:
                lo, hi = part.split("..")
                lo, hi = int(lo), int(hi)
                if hi < lo:
                    raise ConfigError(f"empty range {part!r}")
                out.extend(range(lo, hi + 1))
            else:
                out.append(int(part))
        except ValueError as exc:
            raise ConfigError(f"bad integer list {text!r}") from exc
    return out


class Emitter:
    """Single writer: records leave in submission order."""

    def __init__(self, fmt: str, stream, deterministic: bool):
        self.fmt, self.stream, self.deterministic = fmt, stream, deterministic
        self.rows: list[dict] = []

    def emit(self, record: dict) -> None:
        record = dict(record)
        if not self.deterministic:
            record["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
        if self.fmt == "json":
            self.stream.write(json.dumps(record, default=_json_default) + "\n")
            self.stream.flush()
        else:
            self.rows.append(record)

    def close(self) -> None:
        if self.fmt == "csv" and self.rows:
            fields: list[str] = []
            for r in self.rows:
                fields += [k for k in r if k not in fields]
            w = csv.DictWriter(self.stream, fieldnames=fields, restval="", lineterminator="\r\n")
            w.writeheader()
            w.writerows(self.rows)
        self.stream.flush()


def _json_default(o):
    if isinstance(o, Fraction):
        return str(o)
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not JSON serializable: {type(o)}")


def _finite(x: float):
    return x if math.isfinite(x) else None


def _pool_map(fn, tasks, jobs: int):
    if jobs == 1:
        return map(fn, tasks)
    pool = ThreadPoolExecutor(max_workers=jobs)
    return pool.map(fn, tasks)


# -- subcommands -------------------------------------------------------------------

def run_gap(cfg: RunConfig, out: Emitter) -> int:
    cfg.validate()
    if cfg.d < 1:
        raise ConfigError("--d must be >= 1")
    if any(n < 2 for n in cfg.n_list):
        raise ConfigError("every n must be >= 2 (the traceless subspace of M_1 is empty)")
    tol = cfg.tolerances.get("tol", DEFAULT_TOL)
    max_iter = int(cfg.tolerances.get("max_iter", DEFAULT_MAX_ITER))
    tasks = [(n, s) for n in cfg.n_list for s in cfg.seeds]

    def work(task):
        n, seed = task
        t = sample_tuple(n, cfg.d, seed)
        spec = lambda2(t, tol, max_iter)
        gap = commutant_gap(t, [np.eye(n)], tol, max_iter)
        log.info("gap n=%d seed=%d lambda2=%.6f residual=%.2e", n, seed, spec.lambda2, spec.residual)
        return {"n": n, "d": cfg.d, "seed": seed, "lambda2": spec.lambda2, "epsilon": gap.epsilon,
                "C": _finite(gap.constant_C), "iterations": spec.iterations,
                "residual": spec.residual, "certified": spec.converged and gap.certified}

    target = math.sqrt(2 * cfg.d - 1) / cfg.d
    devs = []
    for rec in _pool_map(work, tasks, cfg.jobs):
        if not rec["certified"]:
            log.warning("run n=%d seed=%d not certified (residual %.2e)", rec["n"], rec["seed"],
                        rec["residual"])
        devs.append(abs(rec["lambda2"] - target))
        out.emit(rec)
    out.emit({"summary": True, "d": cfg.d, "runs": len(devs), "target": target,
              "mean_abs_dev": float(np.mean(devs))})
    return EXIT_OK


def run_separation(cfg: RunConfig, out: Emitter, fraction: float = 0.8, trials: int = 100) -> int:
    cfg.validate()
    if any(n < 2 for n in cfg.n_list):
        raise ConfigError("every n must be >= 2")
    if not 0 <= fraction <= 1:
        raise ConfigError("--fraction must lie in [0, 1]")
    tasks = [(n, s) for n in cfg.n_list for s in cfg.seeds]

    def work(task):
        n, seed = task
        rep = certify_separation(build_xy(n, seed), trials=trials)
        log.info("separation n=%d seed=%d certified=%s", n, seed, rep.certified)
        return rep

    ok = 0
    for rep in _pool_map(work, tasks, cfg.jobs):
        ok += rep.certified
        out.emit(rep.to_record())
    frac = ok / len(tasks)
    out.emit({"summary": True, "runs": len(tasks), "certified": ok, "fraction": frac,
              "required_fraction": fraction})
    return EXIT_OK if frac >= fraction else EXIT_UNCERTIFIED


def run_qe(path: str, out) -> int:
    try:
        dec = qe.load_decomposition(path)
        verdict = qe.decide_qe(dec)
    except (OSError, ValueError, KeyError, TypeError, ZeroDivisionError) as exc:
        log.error("bad decomposition %s: %s", path, exc)
        return EXIT_CONFIG
    rec = verdict.to_json()
    rec["model_completeness"] = qe.mc_verdict(dec)
    out.write(json.dumps(rec) + "\n")
    return EXIT_OK if verdict.qe else EXIT_NOT_QE


def run_genericity(k: int, trials: int, mode: str, tol: float, seed: int, bits: int,
                   out: Emitter) -> int:
    if k < 1 or trials < 1:
        raise ConfigError("--k and --trials must be >= 1")
    frac = qe.genericity_sample(k, trials, mode, tol, seed, bits)
    out.emit({"summary": True, "k": k, "trials": trials, "mode": mode, "tol": tol, "seed": seed,
              "fraction": frac})
    return EXIT_OK


def run_expander_check(manifest: str, cfg: RunConfig, out: Emitter) -> int:
    try:
        t = load_tuple(manifest)
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError(f"cannot read tuple manifest: {exc}") from exc
    if t.n < 2:
        raise ConfigError("tuple size must be >= 2")
    eps = expander_epsilon(t, cfg.tolerances.get("tol", DEFAULT_TOL),
                           int(cfg.tolerances.get("max_iter", DEFAULT_MAX_ITER)))
    out.emit({"n": t.n, "d": t.d, "seed": t.seed, "expander_epsilon": eps})
    return EXIT_OK


def run_concentration(word: str, cfg: RunConfig, trials: int, out: Emitter) -> int:
    cfg.validate()
    if trials < 30:
        raise ConfigError("--trials must be >= 30")
    for row in concentration_scan(word, cfg.n_list, trials, cfg.seeds[0]):
        out.emit({"word": word, **row})
    return EXIT_OK


def run_moments(words: list[str], cfg: RunConfig, out: Emitter) -> int:
    cfg.validate()
    for n in cfg.n_list:
        for seed in cfg.seeds:
            for row in moment_match(build_xy(n, seed), words):
                out.emit(row)
    return EXIT_OK


def run_sample(cfg: RunConfig, directory: str, matrix_format: str, out: Emitter) -> int:
    cfg.validate()
    for n in cfg.n_list:
        for seed in cfg.seeds:
            sub = os.path.join(directory, f"n{n}_d{cfg.d}_s{seed}")
            path = save_tuple(sample_tuple(n, cfg.d, seed), sub, matrix_format)
            out.emit({"n": n, "d": cfg.d, "seed": seed, "manifest": str(path)})
    return EXIT_OK


# -- argument parsing --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--n", default="", help="sizes: comma list and/or a..b ranges")
    common.add_argument("--d", type=int, default=3)
    common.add_argument("--seeds", default=None, help="seeds: comma list and/or a..b ranges")
    common.add_argument("--seed", type=int, default=None, help="single u64 seed")
    common.add_argument("--tol", type=float, default=DEFAULT_TOL)
    common.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER)
    common.add_argument("--jobs", type=int, default=int(os.environ.get("QXLAB_JOBS", "1")))
    common.add_argument("--out", default=None, help="output file (default stdout)")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--deterministic", action="store_true", help="suppress timestamps")
    common.add_argument("-q", "--quiet", action="store_true")

    p = argparse.ArgumentParser(prog="qxlab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    sub.add_parser("gap", parents=[common], help="lambda2 and commutant gap of Haar tuples")
    s = sub.add_parser("separation", parents=[common], help="X/Y separation certificates")
    s.add_argument("--fraction", type=float, default=0.8)
    s.add_argument("--trials", type=int, default=100)
    e = sub.add_parser("expander-check", parents=[common], help="expander constant of a saved tuple")
    e.add_argument("manifest")
    q = sub.add_parser("qe", parents=[common], help="decide QE for a decomposition JSON file")
    q.add_argument("input")
    g = sub.add_parser("genericity", parents=[common], help="QE fraction of random atomic weights")
    g.add_argument("--k", type=int, default=3)
    g.add_argument("--trials", type=int, default=10000)
    g.add_argument("--mode", choices=("float_tolerance", "exact_rational"), default="float_tolerance")
    g.add_argument("--bits", type=int, default=6, help="dyadic rounding in exact mode")
    c = sub.add_parser("concentration", parents=[common], help="std of a word trace across n")
    c.add_argument("--word", default="1 2 1* 2*")
    c.add_argument("--trials", type=int, default=200)
    m = sub.add_parser("moments", parents=[common], help="word traces of X versus Y")
    m.add_argument("--words", default="1 2 1* 2*;1 3 1* 3*;3 2 3* 2*;1 2 3;1 3* 2 3",
                   help="semicolon-separated reduced words")
    sp = sub.add_parser("sample", parents=[common], help="export Haar tuples with manifests")
    sp.add_argument("--matrix-format", choices=("bin", "json"), default="bin")
    return p


def _config(args) -> RunConfig:
    if args.seeds is not None:
        seeds = parse_int_list(args.seeds)
    elif args.seed is not None:
        seeds = [args.seed]
    else:
        seeds = [0]
    if any(s < 0 or s >= 1 << 64 for s in seeds):
        raise ConfigError("seeds must be unsigned 64-bit integers")
    return RunConfig(subcommand=args.cmd, n_list=parse_int_list(args.n), d=args.d, seeds=seeds,
                     tolerances={"tol": args.tol, "max_iter": args.max_iter},
                     output_path=args.out, format=args.format,
                     deterministic=args.deterministic, jobs=args.jobs)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    logging.basicConfig(stream=sys.stderr, level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.cmd == "qe":
            buf = io.StringIO()
            code = run_qe(args.input, buf)
            _write(cfg.output_path, buf.getvalue())
            return code
        buf = io.StringIO()
        out = Emitter(cfg.format, buf, cfg.deterministic)
        if args.cmd == "gap":
            code = run_gap(cfg, out)
        elif args.cmd == "separation":
            code = run_separation(cfg, out, args.fraction, args.trials)
        elif args.cmd == "expander-check":
            code = run_expander_check(args.manifest, cfg, out)
        elif args.cmd == "genericity":
            seed = args.seed if args.seed is not None else cfg.seeds[0]
            code = run_genericity(args.k, args.trials, args.mode, args.tol, seed, args.bits, out)
        elif args.cmd == "concentration":
            code = run_concentration(args.word, cfg, args.trials, out)
        elif args.cmd == "moments":
            code = run_moments([w for w in args.words.split(";") if w.strip()], cfg, out)
        else:
            if not cfg.output_path:
                raise ConfigError("sample needs --out DIRECTORY")
            code = run_sample(cfg, cfg.output_path, args.matrix_format,
                              Emitter(cfg.format, sys.stdout, cfg.deterministic))
            return code
        out.close()
        _write(cfg.output_path, buf.getvalue())
        return code
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except Exception:  # total exit-code contract
        log.exception("unexpected failure")
        return EXIT_CONFIG


def _write(path, text: str) -> None:
    if path:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
        sys.stdout.flush()


if __name__ == "__main__":
    sys.exit(main())
