"""Command-line entry point.

Every command accepts ``--config FILE`` (a JSON object whose keys are the
command's long option names) and ``--seed``; explicit flags override the
file.  Outputs go to ``--output DIR`` together with ``manifest.json``.

Exit codes: 0 success, 1 numerical/runtime failure, 2 usage or invalid input.
Errors are written to stderr as a single JSON line.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .appendix import verify_ci_equality
from .bayes import (
    Estimator,
    MeasurementRecord,
    PosteriorSummary,
    PriorSpec,
    estimator_risk,
    mle_estimate,
    posterior_update,
    sample_prior,
    simulate_record,
)
from .core import (
    DensityMatrix,
    MeasurementBasis,
    Povm,
    counter_rng,
    depolarize,
    random_pure_state,
    relative_entropy,
    von_neumann_entropy,
)
from .errors import HonestQSEError, InvalidInputError
from .game import GameConfig, fidelity_counterexample, simulate_game
from .scoring import ScoringRule, expected_reward, propriety_gap

COMMANDS = ("simulate-game", "estimate", "risk-study", "counterexample", "verify-appendix", "score")
PRESETS = ("zero", "one", "plus", "maximally-mixed", "bell")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def load_state(source: str, dim: int = 2) -> DensityMatrix:
    """Preset name or path to a JSON matrix file; always validated."""
    if source == "zero":
        return DensityMatrix.basis_state(0, 2)
    if source == "one":
        return DensityMatrix.basis_state(1, 2)
    if source == "plus":
        return DensityMatrix.pure([1.0, 1.0])
    if source == "maximally-mixed":
        return DensityMatrix.maximally_mixed(dim)
    if source == "bell":
        return DensityMatrix.pure([1.0, 0.0, 0.0, 1.0])
    path = Path(source)
    if not path.is_file():
        raise InvalidInputError(f"state {source!r} is neither a preset {PRESETS} nor a readable file")
    with open(path, encoding="utf-8") as fh:
        return DensityMatrix.from_dict(json.load(fh))


def load_measurement(name: str, dim: int = 2) -> Povm:
    if name == "pauli6":
        return Povm.pauli6()
    if name == "sic":
        return Povm.qubit_sic()
    if name == "computational":
        return Povm.from_basis(MeasurementBasis.computational(dim))
    raise InvalidInputError(f"unknown measurement {name!r} (choose pauli6, sic, computational)")


def load_prior(source: str, dim: int) -> PriorSpec:
    if source in ("hs", "hilbert-schmidt"):
        return PriorSpec.hilbert_schmidt(dim)
    if source in ("bures", "bures-like"):
        return PriorSpec.bures_like(dim)
    path = Path(source)
    if not path.is_file():
        raise InvalidInputError(f"prior {source!r} is neither hs/bures nor a readable JSON file")
    with open(path, encoding="utf-8") as fh:
        return PriorSpec.from_dict(json.load(fh))


def _clean(obj):
    """Make a structure JSON-safe: numpy scalars to Python, infinities to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return x
    return obj


def _write_json(path, data):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_clean(data), fh, indent=2, sort_keys=True)
        fh.write("\n")


def _rule(args) -> ScoringRule:
    return ScoringRule(args.rule, args.c, args.d)


# -- commands -----------------------------------------------------------------

def cmd_simulate_game(args, out: Path) -> list[str]:
    truth = load_state(args.truth, args.dim)
    report = load_state(args.report, args.dim)
    transcript = simulate_game(GameConfig(truth, report, _rule(args), args.rounds, args.seed))
    transcript.write_csv(out / "transcript.csv")
    _write_json(out / "summary.json", transcript.summary())
    # payoffs take at most dim distinct values, so value counts are the exact histogram
    values, counts = np.unique(transcript.payoffs, return_counts=True)
    with open(out / "reward_histogram.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["payoff", "count", "frequency"])
        for v, c in zip(values, counts):
            w.writerow([repr(float(v)), int(c), repr(float(c) / transcript.rounds)])
    return ["transcript.csv", "summary.json", "reward_histogram.csv"]


def cmd_score(args, out: Path) -> list[str]:
    truth = load_state(args.truth, args.dim)
    report = load_state(args.report, args.dim)
    rule = _rule(args)
    data = {
        "rule": rule.to_dict(),
        "expected_reward": expected_reward(rule, truth, report),
        "honest_expected_reward": expected_reward(rule, truth, truth),
        "propriety_gap": propriety_gap(rule, truth, report),
        "relative_entropy": relative_entropy(truth, report),
        "truth_entropy": von_neumann_entropy(truth),
    }
    _write_json(out / "score.json", data)
    print(json.dumps(_clean(data), sort_keys=True))
    return ["score.json"]


def cmd_estimate(args, out: Path) -> list[str]:
    written = []
    if args.record:
        with open(args.record, encoding="utf-8") as fh:
            record = MeasurementRecord.from_dict(json.load(fh))
    else:
        if not args.truth:
            raise InvalidInputError("estimate needs --record or --truth with --copies")
        truth = load_state(args.truth, args.dim)
        povm = load_measurement(args.measurement, truth.dim)
        record, _ = simulate_record(truth, povm, args.copies, counter_rng(args.seed, 1))
        _write_json(out / "record.json", record.to_dict())
        written.append("record.json")
    prior = load_prior(args.prior, record.dim)
    ensemble = sample_prior(prior, args.particles, seed=args.seed)
    post = posterior_update(ensemble, record, resample=True, seed=args.seed)
    data = {"prior": prior.to_dict(), "copies": len(record), "particles": args.particles,
            "posterior": PosteriorSummary.of(post).to_dict()}
    if len(record):
        mle = mle_estimate(record, tolerance=args.mle_tolerance, max_iters=args.mle_max_iters)
        data["mle"] = {"state": mle.state.to_dict(), "converged": mle.converged,
                       "iterations": mle.iterations, "log_likelihood": mle.log_likelihood}
    _write_json(out / "estimate.json", data)
    return written + ["estimate.json"]


def cmd_risk_study(args, out: Path) -> list[str]:
    prior = load_prior(args.prior, args.dim)
    povm = load_measurement(args.measurement, prior.dim)
    copies = [int(x) for x in str(args.copies).split(",") if x.strip()]
    estimators = [Estimator(e.strip()) for e in str(args.estimators).split(",") if e.strip()]
    truths = None
    if args.truth_noise is not None:
        rng = counter_rng(args.seed, 9)
        truths = [depolarize(random_pure_state(prior.dim, rng), args.truth_noise) for _ in range(args.trials)]
    table = estimator_risk(prior, args.trials, copies, povm, estimators, seed=args.seed,
                           particles=args.particles, truths=truths)
    table.write_csv(out / "risk_table.csv")
    summary = table.summary()
    _write_json(out / "risk_summary.json", {"prior": prior.to_dict(), "measurement": args.measurement,
                                            "summary": summary})
    cols = ["estimator", "N", "mean_risk", "median_risk", "q10_risk", "q90_risk",
            "infinite_risk_frequency", "rank_deficient_frequency", "median_trace_distance"]
    with open(out / "risk_curve.csv", "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(cols)
        for row in summary:
            w.writerow([row[c] if not isinstance(row[c], float) else repr(row[c]) for c in cols])
    return ["risk_table.csv", "risk_summary.json", "risk_curve.csv"]


def cmd_counterexample(args, out: Path) -> list[str]:
    report = fidelity_counterexample(args.resolution)
    _write_json(out / "counterexample.json", report.to_dict())
    return ["counterexample.json"]


def cmd_verify_appendix(args, out: Path) -> list[str]:
    report = verify_ci_equality(args.dim, args.trials, args.seed)
    _write_json(out / "appendix_report.json", report.to_dict())
    with open(out / "appendix_report.txt", "w", encoding="utf-8", newline="\n") as fh:
        fh.write(report.text() + "\n")
    print(report.text())
    return ["appendix_report.json", "appendix_report.txt"]


# -- argument handling --------------------------------------------------------

def _add(p, *names, **kw):
    kw.setdefault("default", None)
    p.add_argument(*names, **kw)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="honestqse", description="Honest quantum state estimation experiments")
    parser.add_argument("--version", action="version", version=f"honestqse {__version__}")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    sub.required = True

    specs = {
        "simulate-game": (cmd_simulate_game, {
            "truth": dict(type=str, default="maximally-mixed"),
            "report": dict(type=str, default="maximally-mixed"),
            "dim": dict(type=int, default=2),
            "rounds": dict(type=int, default=100_000),
            "rule": dict(choices=["hers", "brier"], default="hers"),
            "c": dict(type=float, default=0.0),
            "d": dict(type=float, default=1.0),
        }),
        "score": (cmd_score, {
            "truth": dict(type=str, default="maximally-mixed"),
            "report": dict(type=str, default="maximally-mixed"),
            "dim": dict(type=int, default=2),
            "rule": dict(choices=["hers", "brier"], default="hers"),
            "c": dict(type=float, default=0.0),
            "d": dict(type=float, default=1.0),
        }),
        "estimate": (cmd_estimate, {
            "record": dict(type=str, default=None),
            "truth": dict(type=str, default=None),
            "dim": dict(type=int, default=2),
            "copies": dict(type=int, default=100),
            "measurement": dict(type=str, default="pauli6"),
            "prior": dict(type=str, default="hs"),
            "particles": dict(type=int, default=10_000),
            "mle-tolerance": dict(type=float, default=1e-8),
            "mle-max-iters": dict(type=int, default=10_000),
        }),
        "risk-study": (cmd_risk_study, {
            "prior": dict(type=str, default="hs"),
            "dim": dict(type=int, default=2),
            "trials": dict(type=int, default=100),
            "copies": dict(type=str, default="0,10,100,1000"),
            "estimators": dict(type=str, default="bayes-mean,mle"),
            "measurement": dict(type=str, default="pauli6"),
            "particles": dict(type=int, default=2000),
            "truth-noise": dict(type=float, default=None),
        }),
        "counterexample": (cmd_counterexample, {
            "resolution": dict(type=int, default=20),
        }),
        "verify-appendix": (cmd_verify_appendix, {
            "dim": dict(type=int, default=3),
            "trials": dict(type=int, default=1000),
        }),
    }
    parser.set_defaults(_specs=specs)
    for name, (_, options) in specs.items():
        p = sub.add_parser(name)
        _add(p, "--config", type=str)
        _add(p, "--seed", type=int)
        _add(p, "--output", type=str)
        for opt, kw in options.items():
            kw = {k: v for k, v in kw.items() if k != "default"}
            _add(p, f"--{opt}", **kw)
    return parser


def _resolve(args, specs) -> argparse.Namespace:
    """defaults <- config file <- explicit flags."""
    _, options = specs[args.command]
    allowed = set(options) | {"seed", "output"}
    merged = {opt: kw.get("default") for opt, kw in options.items()}
    merged.update(seed=0, output=None)
    if args.config:
        try:
            with open(args.config, encoding="utf-8") as fh:
                cfg = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        for key, value in cfg.items():
            opt = key.replace("_", "-")
            if opt not in allowed:
                raise UsageError(f"unknown config key: {key}")
            merged[opt] = value
    for opt in allowed:
        value = getattr(args, opt.replace("-", "_"))
        if value is not None:
            merged[opt] = value
    seed = int(merged["seed"])
    if not 0 <= seed < 2**64:
        raise UsageError(f"seed must be a 64-bit unsigned integer, got {seed}")
    ns = argparse.Namespace(command=args.command, config=args.config)
    for opt, value in merged.items():
        setattr(ns, opt.replace("-", "_"), value)
    if ns.output is None:
        ns.output = os.path.join("runs", args.command)
    return ns


def _fail(kind: str, message: str, code: int) -> int:
    line = json.dumps({"error": kind, "message": " ".join(str(message).split())})
    print(line, file=sys.stderr)
    return code


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        cfg = _resolve(args, args._specs)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    handler = args._specs[cfg.command][0]
    out = Path(cfg.output)
    start = time.perf_counter()
    try:
        out.mkdir(parents=True, exist_ok=True)
        written = handler(cfg, out)
    except InvalidInputError as exc:
        return _fail("invalid-input", f"{cfg.command}: {exc}", 2)
    except (HonestQSEError, FloatingPointError, np.linalg.LinAlgError, OSError) as exc:
        return _fail("runtime", f"{cfg.command}: {type(exc).__name__}: {exc}", 1)
    manifest = {
        "tool": "honestqse",
        "version": __version__,
        "kernel_backend": kernels.BACKEND,
        "command": cfg.command,
        "config": {k: v for k, v in vars(cfg).items() if k not in ("command", "config")},
        "config_file": cfg.config,
        "outputs": written,
        "wall_time_seconds": time.perf_counter() - start,
    }
    _write_json(out / "manifest.json", manifest)
    return 0


def main(argv=None):
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
