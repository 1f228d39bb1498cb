"""Command-line entry point: ``slipdetect <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 input error, 3 numeric or
convergence failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import warnings
from pathlib import Path
from typing import List, Optional

import numpy as np

from . import benchmark, fileio
from .classifiers import NumericError
from .features import FrameError
from .online import SlipDetector, StrategyConfig, run_stream
from .simulator import SensorNoiseProfile, gen_grasp_run, gen_single_finger_run
from .simulator.physics import PhysicsError
from .simulator.scenarios import (scenario_destabilise, scenario_first_grasp,
                                  scenario_rail_catch)
from .training import (build_dataset, downsample_static, evaluate, hyperparam_search,
                       make_classifier, sweep)

log = logging.getLogger("slipdetect")

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_NUMERIC = 0, 1, 2, 3

REPORT_COLUMNS = ["source", "scenario", "seed", "outcome", "slip_distance_mm",
                  "slips_detected", "overgrasp", "n_triggers", "first_trigger_ms"]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(text: str) -> List[float]:
    return [float(x) for x in text.split(",") if x.strip()]


def _ints(text: str) -> List[int]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if "-" in part:
            a, b = part.split("-")
            out.extend(range(int(a), int(b) + 1))
        elif part:
            out.append(int(part))
    return out


def _noise(args) -> SensorNoiseProfile:
    return SensorNoiseProfile(transient_rate=0.0) if getattr(args, "no_transients", False) \
        else SensorNoiseProfile()


def _model_params(args) -> dict:
    if args.model == "threshold":
        return {"n_candidates": args.n_candidates}
    if args.model == "logreg":
        return {"C": args.C if args.C is not None else benchmark.LOGREG_PARAMS["C"]}
    params = {"kernel": args.kernel,
              "gamma": args.gamma if args.gamma is not None else benchmark.SVM_PARAMS["gamma"],
              "C": args.C if args.C is not None else benchmark.SVM_PARAMS["C"]}
    return params


def _runs_or_default(args, which: str):
    if args.runs:
        return fileio.read_runs(args.runs)
    bench = benchmark.load_benchmark(benchmark.BenchmarkConfig(seed=args.seed))
    log.info("no --runs given: using the default benchmark %s split", which)
    return bench.train_runs if which == "train" else bench.test_runs


# ---------------------------------------------------------------- commands

def cmd_gen(args) -> int:
    rng = np.random.default_rng(args.seed)
    out = Path(args.output)
    noise = _noise(args)
    paths = []
    for i in range(args.n):
        s = int(rng.integers(0, 2**31 - 1))
        if args.kind == "rail":
            speed = args.retract_speed if args.retract_speed is not None \
                else float(rng.uniform(0.1, 5.0))
            run = gen_single_finger_run(noise, speed, s, run_id=f"rail-{i:04d}")
        else:
            run = gen_grasp_run(noise, _floats(args.shares), args.release_rate, s,
                                run_id=f"grasp-{i:04d}")
        paths.append(fileio.write_run(run, out / f"{run.run_id}.jsonl"))
    print(f"wrote {len(paths)} runs to {out}")
    return EXIT_OK


def cmd_train(args) -> int:
    runs = _runs_or_default(args, "train")
    params = _model_params(args)
    ds = build_dataset(runs, args.n_slip, args.fall_threshold)
    ds = downsample_static(ds, args.d, args.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = make_classifier(args.model, **params).fit(ds.X, ds.y)
    training = {"dataset_hash": fileio.config_hash([ds.X, ds.y]), "seed": args.seed,
                "d": args.d, "n_slip": args.n_slip, "n_samples": len(ds),
                "n_static": ds.n_static, "n_slip_samples": ds.n_slip,
                "runs": sorted({r.run_id for r in runs})}
    fileio.save_model(model, args.output, training)
    converged = bool(getattr(model, "converged_", True))
    print(json.dumps({"model": args.output, "kind": model.kind, "params": params,
                      "converged": converged, "n_train": len(ds)}))
    if not converged:
        log.error("training did not converge")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_eval(args) -> int:
    model = fileio.load_model(args.model)
    runs = _runs_or_default(args, "test")
    ds = build_dataset(runs, args.n_slip, args.fall_threshold)
    score = evaluate(model, ds)
    rec = {"model": args.model, "kind": model.kind, "n_slip": args.n_slip,
           "n_samples": len(ds), "macro_f1": score}
    print(json.dumps(rec))
    log.info("macro-F1 %.6f on %d samples", score, len(ds))
    if args.log:
        with open(args.log, "a") as fh:
            fh.write(json.dumps(rec) + "\n")
    return EXIT_OK


def cmd_sweep(args) -> int:
    runs = fileio.read_runs(args.runs) if args.runs else None
    if runs is None:
        bench = benchmark.load_benchmark(benchmark.BenchmarkConfig(seed=args.seed))
        split = (bench.train_runs, bench.test_runs)
        runs = bench.train_runs + bench.test_runs
    else:
        split = None
    report = sweep(runs, args.model, _floats(args.d_values), _ints(args.n_slip_values),
                   _model_params(args), args.seed, args.fall_threshold, split=split)
    text = report.to_csv()
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    failed = [c for c in report.rows() if c.error]
    for c in failed:
        log.error("cell d=%s n_slip=%s failed: %s", c.d, c.n_slip, c.error)
    return EXIT_NUMERIC if failed and len(failed) == len(report.cells) else EXIT_OK


def cmd_search(args) -> int:
    runs = _runs_or_default(args, "train")
    fixed = {"kernel": args.kernel} if args.model == "svm" else {}
    res = hyperparam_search(runs, args.model, budget=args.budget, folds=args.folds,
                            seed=args.seed, d=args.d, n_slip=args.n_slip, fixed=fixed)
    out = {"kind": args.model, "params": res.params, "score": res.score,
           "candidates": [{"params": p, "score": s} for p, s in res.candidates]}
    text = json.dumps(out, indent=1)
    if args.output:
        Path(args.output).write_text(text + "\n")
    print(json.dumps({"params": res.params, "score": res.score}))
    return EXIT_OK


def _strategy(args) -> StrategyConfig:
    return StrategyConfig.parse(args.strategy, window_ms=args.window_ms,
                                refractory_ms=args.refractory_ms)


def cmd_replay(args) -> int:
    model = fileio.load_model(args.model)
    runs = [run for path in args.run for run in fileio.read_runs(path)]
    records = []
    for run in runs:
        strat = _strategy(args)
        det = SlipDetector(model, strat, sensor_ids=run.sensor_ids)
        res = run_stream(det, run)
        summary = {"run_id": run.run_id, "strategy": strat.name, "outcome": res.outcome,
                   "latency_ms": res.latency_ms, "onset_ms": res.onset_ms,
                   "triggers": [e.t_ms for e in res.triggers]}
        print(json.dumps(summary))
        records.append({"summary": summary})
        if args.log:
            # one run: the log is a file; several: a directory of per-run logs
            target = Path(args.log) / f"{run.run_id}.events.jsonl" if len(runs) > 1 else args.log
            fileio.write_jsonl(res.log, target)
    if args.output:
        fileio.write_jsonl(records, args.output)
    return EXIT_OK


def cmd_scenario(args) -> int:
    model = fileio.load_model(args.model) if args.model else benchmark.benchmark_model("svm")
    results = []
    for k in range(args.repeats):
        seed = args.seed + k
        if args.name == "destabilise":
            strat = _strategy(args)
            res = scenario_destabilise(model, strat, args.mass_ramp, seed,
                                       start_mass_g=args.mass, response_step=args.response_step)
        elif args.name == "first-grasp":
            res = scenario_first_grasp(model, args.mass, args.deformation_threshold,
                                       args.grip_step, args.delay, args.lift_speed, seed)
        else:
            res = scenario_rail_catch(model, _strategy(args), seed)
        results.append((seed, res))
        print(json.dumps({"scenario": args.name, **fileio.to_plain(res.summary())}))
    if args.output:
        out = Path(args.output)
        recs = []
        for seed, res in results:
            if res.run is not None:
                recs.extend(fileio.run_records(res.run))
            recs.append({"summary": {"scenario": args.name, **res.summary()}})
        fileio.write_jsonl(recs, out)
    return EXIT_OK


def _summaries(path: Path):
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                rec = json.loads(line)
                if "summary" in rec:
                    yield rec["summary"]


def cmd_report(args) -> int:
    rows = []
    for p in args.inputs:
        for s in _summaries(Path(p)):
            trig = s.get("trigger_ms", s.get("triggers", []))
            rows.append({"source": Path(p).name, "scenario": s.get("scenario", s.get("strategy")),
                         "seed": s.get("seed"), "outcome": s.get("outcome"),
                         "slip_distance_mm": s.get("slip_distance_mm"),
                         "slips_detected": s.get("slips_detected", len(trig)),
                         "overgrasp": s.get("overgrasp"), "n_triggers": len(trig),
                         "first_trigger_ms": trig[0] if trig else None})
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        w = csv.DictWriter(fh, fieldnames=REPORT_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if v is None else v for k, v in r.items()})
    finally:
        if args.output:
            fh.close()
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _add_label_opts(p):
    p.add_argument("--n-slip", type=int, default=13)
    p.add_argument("--fall-threshold", type=float, default=2.0, help="mm below baseline")


def _add_model_opts(p, required=True):
    p.add_argument("--model", choices=["threshold", "logreg", "svm"], required=required)
    p.add_argument("--kernel", choices=["gaussian", "linear"], default="gaussian")
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--n-candidates", type=int, default=10)


def _add_strategy_opts(p, default):
    p.add_argument("--strategy", default=default, help="e.g. 2Fr2Sen")
    p.add_argument("--window-ms", type=float, default=50.0)
    p.add_argument("--refractory-ms", type=float, default=100.0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="slipdetect", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="JSON file of option defaults")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen", help="generate synthetic run files")
    p.add_argument("--kind", choices=["rail", "grasp"], default="rail")
    p.add_argument("--n", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--retract-speed", type=float, default=None, help="mm/s; random if unset")
    p.add_argument("--release-rate", type=float, default=0.001, help="grip per frame")
    p.add_argument("--shares", default="0.5,0.25,0.25")
    p.add_argument("--no-transients", action="store_true")
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("train", help="train a classifier and write a model file")
    _add_model_opts(p)
    p.add_argument("--runs", help="run file or directory (default: benchmark train split)")
    p.add_argument("--d", type=float, default=0.4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output", default="model.json")
    _add_label_opts(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="macro-F1 of a model file on labelled runs")
    p.add_argument("--model", required=True, help="model file")
    p.add_argument("--runs", help="run file or directory (default: benchmark test split)")
    p.add_argument("--seed", type=int, default=0, help="benchmark seed when --runs is unset")
    p.add_argument("--log", help="append the result as a JSON line")
    _add_label_opts(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="macro-F1 over a d x n_slip grid, as CSV")
    _add_model_opts(p)
    p.add_argument("--runs")
    p.add_argument("--d-values", default="0.3,0.4,0.5,0.6,0.7,0.8,0.9,1.0")
    p.add_argument("--n-slip-values", default="5-15")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--fall-threshold", type=float, default=2.0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("search", help="seeded random hyperparameter search")
    p.add_argument("--model", choices=["logreg", "svm"], required=True)
    p.add_argument("--kernel", choices=["gaussian", "linear"], default="gaussian")
    p.add_argument("--runs")
    p.add_argument("--budget", type=int, default=30)
    p.add_argument("--folds", type=int, default=3)
    p.add_argument("--d", type=float, default=0.4)
    p.add_argument("--n-slip", type=int, default=13)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("replay", help="online detection over recorded runs")
    p.add_argument("--model", required=True)
    p.add_argument("--run", nargs="+", required=True)
    _add_strategy_opts(p, "2Fr1Sen")
    p.add_argument("--log", help="event log (JSONL) path")
    p.add_argument("-o", "--output", help="summary records (JSONL)")
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("scenario", help="closed-loop grasp scenarios")
    p.add_argument("name", choices=["destabilise", "first-grasp", "rail-catch"])
    p.add_argument("--model", help="model file (default: benchmark SVM)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--repeats", type=int, default=1)
    _add_strategy_opts(p, "2Fr2Sen")
    p.add_argument("--mass", type=float, default=150.0, help="g (start mass for destabilise)")
    p.add_argument("--mass-ramp", type=float, default=50.0, help="g/s")
    p.add_argument("--response-step", type=float, default=0.02)
    p.add_argument("--deformation-threshold", type=float, default=0.5)
    p.add_argument("--grip-step", type=float, default=0.01)
    p.add_argument("--delay", type=float, default=0.1, help="s")
    p.add_argument("--lift-speed", type=float, default=17.0, help="mm/s")
    p.add_argument("-o", "--output", help="JSONL: run records plus a summary per repeat")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("report", help="CSV table of scenario/replay summaries")
    p.add_argument("inputs", nargs="+")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_report)
    return parser


def _apply_config(parser: argparse.ArgumentParser, argv: List[str]):
    """Config file values become defaults, flags still override them."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config:
        return
    cfg = fileio.load_config(known.config)
    sub_action = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
    for name, sp in sub_action.choices.items():
        section = {**{k: v for k, v in cfg.items() if not isinstance(v, dict)},
                   **cfg.get(name, {})}
        dests = {a.dest for a in sp._actions}
        sp.set_defaults(**{k.replace("-", "_"): v for k, v in section.items()
                           if k.replace("-", "_") in dests})


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (fileio.FormatError, OSError, ValueError) as exc:
        print(f"slipdetect: {exc}", file=sys.stderr)
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (NumericError, ArithmeticError) as exc:
        print(f"slipdetect: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (fileio.FormatError, FrameError, PhysicsError, OSError, ValueError, KeyError) as exc:
        print(f"slipdetect: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
