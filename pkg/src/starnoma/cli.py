"""
Command-line front end.

Subcommands
-----------
``run``        power sweep: analytic and/or Monte Carlo outage, sum-rate, baselines
``partition``  two-stage (or two-user) surface partitioning, writes a partition file
``fixtures``   regenerate the calibrated allocation fixtures
``preset``     write a preset scenario file to start editing from

CSV output (``run``) has one row per (power, user) with the columns
``p_dbm, user, op_exact, op_asym, op_mc, op_se, sumrate, sumrate_se,
trials, seed`` followed, per requested baseline ``b``, by ``b_op_exact,
b_op_mc, b_op_se, b_sumrate``.  Values not computed in the chosen mode
are left empty.  Unless ``--no-timestamp`` is given, the first line is a
``# generated ...`` comment.

Output files go to ``--output``; without it they land in
``$STARNOMA_OUTPUT_DIR`` (default: the working directory).  ``-`` writes
to stdout.

Exit codes: 0 ok, 2 configuration error, 3 infeasible power split,
4 partitioning failure.
"""

from __future__ import annotations

import argparse
import csv
import datetime as _dt
import io
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, fixtures
from .channel import draw_elements, dump_raw_csv
from .errors import ConfigError, InfeasibleScenarioError, PartitionError, StarNomaError
from .model import (CorrelationSpec, Partition, dump_document, feasibility_check, load_scenario,
                    partition_to_dict, preset)
from .partition import (DEFAULT_EPSILON, DEFAULT_P_REF_DBM, PartitionRequest, plan_partition,
                        uniform_partition)
from .sim import MIN_TRIALS, noma_op_exact, oma_op_exact, sweep
from .specfun import RandomStream

OUTPUT_DIR_ENV = "STARNOMA_OUTPUT_DIR"
CSV_COLUMNS = ("p_dbm", "user", "op_exact", "op_asym", "op_mc", "op_se",
               "sumrate", "sumrate_se", "trials", "seed")
BASELINE_COLUMNS = ("op_exact", "op_mc", "op_se", "sumrate")
_BASELINE_EXACT = {"noma": noma_op_exact, "oma": oma_op_exact}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------
def _scenario_args(p):
    src = p.add_mutually_exclusive_group()
    src.add_argument("--preset", type=int, choices=(1, 2, 3), help="built-in deployment")
    src.add_argument("--scenario", type=Path, help="scenario YAML file")
    p.add_argument("--n", type=int, help="override the total element count N")


def _request_args(p):
    p.add_argument("--epsilon", type=float, default=None,
                   help=f"outage-floor ceiling for N_thr (default {DEFAULT_EPSILON})")
    p.add_argument("--r-min", type=_floats, default=None, help="comma-separated rate targets")
    p.add_argument("--p-ref", type=float, default=None,
                   help=f"reference power for rate targets, dBm (default {DEFAULT_P_REF_DBM})")
    p.add_argument("--realizations", type=int, default=10_000)
    p.add_argument("--fixture", action="store_true",
                   help="use the calibrated request shipped for this preset and N")


def _output_args(p, formats=("csv", "json")):
    p.add_argument("--output", "-o", default=None, help="output file, or - for stdout")
    p.add_argument("--format", choices=formats, default=formats[0])
    p.add_argument("--no-timestamp", action="store_true", help="omit the generated-at line")


def _floats(text):
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _names(text):
    names = tuple(x.strip().lower() for x in text.split(",") if x.strip())
    bad = [x for x in names if x not in _BASELINE_EXACT]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown baseline(s) {bad}; choose from noma, oma")
    return names


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="starnoma", description="STAR-RIS NOMA outage and partitioning toolkit")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = sub.add_parser("run", help="power sweep")
    _scenario_args(run)
    run.add_argument("--mode", choices=("analytic", "montecarlo", "both"), default="both")
    run.add_argument("--sweep", nargs=3, type=float, metavar=("START", "STOP", "STEP"),
                     default=(0.0, 60.0, 5.0), help="transmit power grid in dBm (inclusive)")
    run.add_argument("--trials", type=int, default=100_000)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--workers", type=int, default=1)
    run.add_argument("--partition", choices=("two-stage", "uniform", "fixture", "file"),
                     default="two-stage")
    run.add_argument("--partition-file", type=Path, help="YAML file with a partition section")
    run.add_argument("--baselines", type=_names, default=(), help="comma list from noma,oma")
    run.add_argument("--kappa", type=float, default=None, help="von Mises phase-error concentration")
    run.add_argument("--correlation", type=float, default=None, metavar="SPACING",
                     help="element spacing in wavelengths; enables sinc spatial correlation")
    run.add_argument("--strict-rate", action="store_true",
                     help="count zero rate for users in outage")
    run.add_argument("--dump-raw", type=Path, default=None,
                     help="also write a small per-element channel CSV (debugging)")
    _request_args(run)
    _output_args(run)

    part = sub.add_parser("partition", help="compute a surface partition")
    _scenario_args(part)
    part.add_argument("--seed", type=int, default=0)
    _request_args(part)
    _output_args(part, formats=("yaml",))

    fix = sub.add_parser("fixtures", help="regenerate calibrated allocation fixtures")
    _output_args(fix, formats=("yaml",))

    pre = sub.add_parser("preset", help="write a preset scenario file")
    pre.add_argument("case", type=int, choices=(1, 2, 3))
    pre.add_argument("--n", type=int)
    _output_args(pre, formats=("yaml",))
    return parser


# ---------------------------------------------------------------------------
# Helpers
# ---------------------------------------------------------------------------
def _load(args):
    if args.scenario is not None:
        scenario, part = load_scenario(args.scenario)
    else:
        scenario, part = preset(args.preset or 1), None
    if args.n is not None:
        scenario = scenario.with_n(args.n)
        part = None
    return scenario, part


def _request(args, scenario, seed):
    if args.fixture:
        if args.preset is None:
            raise ConfigError("--fixture needs --preset")
        req = fixtures.fixture_request(fixtures.fixture(args.preset, scenario.n_total))
        return req
    return PartitionRequest(
        epsilon=DEFAULT_EPSILON if args.epsilon is None else args.epsilon,
        r_min=args.r_min,
        p_ref_dbm=DEFAULT_P_REF_DBM if args.p_ref is None else args.p_ref,
        realizations=args.realizations, seed=seed)


def _require_feasible(scenario):
    report = feasibility_check(scenario)
    if not report.ok:
        raise InfeasibleScenarioError(
            "; ".join(str(v) for v in report.violations), report.violations)


def _power_grid(start, stop, step):
    if not step > 0:
        raise ConfigError("sweep step must be positive")
    if stop < start:
        raise ConfigError("sweep stop must not be below start")
    count = int(np.floor((stop - start) / step + 1e-9)) + 1
    return start + step * np.arange(count)


def _destination(args, default_name):
    if args.output == "-":
        return None
    if args.output is not None:
        return Path(args.output)
    return Path(os.environ.get(OUTPUT_DIR_ENV, ".")) / default_name


def _emit(args, text, default_name):
    dest = _destination(args, default_name)
    if dest is None:
        sys.stdout.write(text)
        return None
    dest.parent.mkdir(parents=True, exist_ok=True)
    dest.write_text(text)
    return dest


def _stamp():
    return _dt.datetime.now(_dt.timezone.utc).replace(microsecond=0).isoformat()


def _num(x):
    return "" if x is None else repr(float(x))


# ---------------------------------------------------------------------------
# run
# ---------------------------------------------------------------------------
def _select_partition(args, scenario, file_part):
    choice = args.partition
    if choice == "uniform":
        return uniform_partition(scenario)
    if choice == "fixture":
        if args.preset is None:
            raise ConfigError("--partition fixture needs --preset")
        return fixtures.fixture_partition(args.preset, scenario.n_total)
    if choice == "file":
        if args.partition_file is not None:
            _, part = load_scenario(args.partition_file)
        else:
            part = file_part
        if part is None:
            raise ConfigError("--partition file needs a partition section "
                              "(--partition-file or in --scenario)")
        return Partition.for_scenario(scenario, part.counts)
    return plan_partition(scenario, _request(args, scenario, args.seed)).partition


def _rows(result, scenario, baselines):
    """Table rows in (power, user) order; None marks a missing value."""
    K = scenario.K
    exact = {b: np.stack([_BASELINE_EXACT[b](scenario, k, result.p_dbm) for k in range(K)], -1)
             for b in baselines}
    rows = []
    for i, p in enumerate(result.p_dbm):
        for k in range(K):
            mc = result.mc
            row = {
                "p_dbm": float(p), "user": k + 1,
                "op_exact": None if result.op_exact is None else result.op_exact[i, k],
                "op_asym": None if result.op_asym is None else result.op_asym[i, k],
                "op_mc": None if mc is None else mc.op[i, k],
                "op_se": None if mc is None else mc.op_se[i, k],
                "sumrate": None if mc is None else mc.sumrate[i],
                "sumrate_se": None if mc is None else mc.sumrate_se[i],
                "trials": None if mc is None else result.trials,
                "seed": result.seed,
            }
            for b in baselines:
                bm = result.baselines.get(b)
                row[f"{b}_op_exact"] = exact[b][i, k]
                row[f"{b}_op_mc"] = None if bm is None else bm.op[i, k]
                row[f"{b}_op_se"] = None if bm is None else bm.op_se[i, k]
                row[f"{b}_sumrate"] = None if bm is None else bm.sumrate[i]
            rows.append(row)
    return rows


def format_csv(rows, baselines, timestamp=None) -> str:
    cols = list(CSV_COLUMNS) + [f"{b}_{c}" for b in baselines for c in BASELINE_COLUMNS]
    buf = io.StringIO()
    if timestamp:
        buf.write(f"# generated {timestamp}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(cols)
    for row in rows:
        out = []
        for c in cols:
            v = row[c]
            if c in ("user", "trials", "seed"):
                out.append("" if v is None else str(int(v)))
            else:
                out.append(_num(v))
        writer.writerow(out)
    return buf.getvalue()


def format_json(rows, scenario, partition, meta, timestamp=None) -> str:
    doc = {
        "scenario": scenario.name,
        "partition": partition_to_dict(partition),
        "meta": meta,
        "columns": list(rows[0]) if rows else list(CSV_COLUMNS),
        "rows": [{k: (None if v is None else (int(v) if k in ("user", "trials", "seed")
                                               else float(v)))
                  for k, v in r.items()} for r in rows],
    }
    if timestamp:
        doc["generated"] = timestamp
    return json.dumps(doc, indent=1) + "\n"


def cmd_run(args) -> int:
    scenario, file_part = _load(args)
    _require_feasible(scenario)
    if args.mode != "analytic" and args.trials < MIN_TRIALS:
        raise ConfigError(f"--trials must be at least {MIN_TRIALS} in Monte Carlo mode")
    if args.workers < 1:
        raise ConfigError("--workers must be positive")
    p = _power_grid(*args.sweep)
    part = _select_partition(args, scenario, file_part)
    corr = None if args.correlation is None else CorrelationSpec.from_frequency(args.correlation)
    result = sweep(scenario, part, p, mode=args.mode, trials=args.trials, seed=args.seed,
                   baselines=args.baselines, workers=args.workers, kappa=args.kappa,
                   correlation=corr, strict=args.strict_rate)
    rows = _rows(result, scenario, args.baselines)
    stamp = None if args.no_timestamp else _stamp()
    if args.format == "csv":
        text = format_csv(rows, args.baselines, stamp)
    else:
        meta = {"mode": args.mode, "trials": args.trials, "seed": args.seed,
                "kappa": args.kappa, "correlation_spacing": args.correlation,
                "strict_rate": args.strict_rate, "baselines": list(args.baselines)}
        text = format_json(rows, scenario, part, meta, stamp)
    dest = _emit(args, text, f"{scenario.name}_run.{args.format}")
    if args.dump_raw is not None:
        ch = draw_elements(RandomStream(args.seed, 0).substream(7), scenario, part, trials=1,
                           kappa=args.kappa, correlation=corr, raw=True)
        dump_raw_csv(ch, args.dump_raw)
    if dest is not None:
        print(f"wrote {dest}", file=sys.stderr)
    return 0


# ---------------------------------------------------------------------------
# partition
# ---------------------------------------------------------------------------
def cmd_partition(args) -> int:
    scenario, _ = _load(args)
    req = _request(args, scenario, args.seed)
    plan = plan_partition(scenario, req)
    part = plan.partition
    print(f"N_thr = {plan.n_thr}")
    print("counts = " + ", ".join(f"U{k + 1}:{n}" for k, n in enumerate(part.counts)))
    print(f"N_t = {part.n_t}, N_r = {part.n_r}")
    floors = analysis.floors(scenario, part)
    print("floors = " + ", ".join(f"{f:.4g}" for f in floors))
    extra = {"request": {"epsilon": req.epsilon,
                         "r_min": None if req.r_min is None else list(req.r_min),
                         "p_ref_dbm": req.p_ref_dbm, "realizations": req.realizations,
                         "seed": req.seed},
             "n_thr": plan.n_thr}
    text = dump_document(scenario, part, extra)
    dest = _emit(args, text, f"{scenario.name}_partition.yaml")
    if dest is not None:
        print(f"wrote {dest}", file=sys.stderr)
    return 0


def cmd_fixtures(args) -> int:
    import yaml

    doc = fixtures.build_fixtures()
    head = "" if args.no_timestamp else f"# generated {_stamp()}\n"
    head += "# CALIBRATION ARTIFACT: inputs fitted to reproduce the reference counts\n"
    dest = _emit(args, head + yaml.safe_dump(doc, sort_keys=False), "fixtures.yaml")
    if dest is not None:
        print(f"wrote {dest}", file=sys.stderr)
    return 0


def cmd_preset(args) -> int:
    scenario = preset(args.case, args.n)
    dest = _emit(args, dump_document(scenario), f"{scenario.name}.yaml")
    if dest is not None:
        print(f"wrote {dest}", file=sys.stderr)
    return 0


_COMMANDS = {"run": cmd_run, "partition": cmd_partition, "fixtures": cmd_fixtures,
             "preset": cmd_preset}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _COMMANDS[args.command](args)
    except PartitionError as exc:
        print(f"error: QoS unmet: {exc}", file=sys.stderr)
        if exc.unmet_users:
            print("unmet users: " + ", ".join(f"U{k + 1}" for k in exc.unmet_users),
                  file=sys.stderr)
        return exc.exit_code
    except StarNomaError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
