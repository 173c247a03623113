"""Command-line front end: ``fairbid {solve,simulate,genlog,validate,stationarity}``."""

from __future__ import annotations

import argparse
import contextlib
import csv
import json
import logging
import sys
import time
from pathlib import Path

from fairbid.config import Config
from fairbid.datalog import empirical_cdf_for, generate_synthetic_log, parse_bid_log, stationarity_distance
from fairbid.errors import ConfigError, FairbidError, InsufficientDataError, NonConvergenceError
from fairbid.experiments import Experiment, write_rows
from fairbid.oracle import check_table, write_reports
from fairbid.tables import dump_table, load_table

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGENCE, EXIT_VALIDATION = 0, 2, 3, 4

log = logging.getLogger("fairbid")


@contextlib.contextmanager
def _output(path):
    if path is None or str(path) == "-":
        yield sys.stdout
        return
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        yield fh


def _out_path(args, cfg: Config, default: str | None = None):
    if args.out is not None:
        return args.out
    return cfg.section("output").get("path", default)


def _first_point(exp: Experiment) -> dict:
    """Scalar commands use the first value of every grid axis."""
    return {k: values[0] for k, values in exp.grid.items()}


def cmd_solve(args, cfg: Config) -> int:
    exp = Experiment(cfg, args.seed)
    point = exp.resolve(_first_point(exp))
    if point.kind not in ("parity", "ratio"):
        raise ConfigError("solve needs constraint.kind = 'parity' or 'ratio'")
    start = time.perf_counter()
    model, table = exp.solve(point)
    wall = time.perf_counter() - start
    out = _out_path(args, cfg, f"{exp.name}.table.csv")
    Path(out).parent.mkdir(parents=True, exist_ok=True)
    dump_table(table, out)
    manifest = {
        "kind": point.kind,
        "K": point.K,
        "r": point.r if point.kind == "ratio" else None,
        "mu": point.mu if point.kind == "ratio" else None,
        "p": point.p,
        "delta": point.delta,
        "epsilon": table.epsilon,
        "iterations": table.iterations,
        "converged_delta": table.converged_delta,
        "wall_seconds": wall,
        "fingerprint": table.fingerprint,
        "delta_trace": table.trace,
    }
    with open(f"{out}.manifest.json", "w") as fh:
        json.dump(manifest, fh, indent=1)
    print(f"solved {point.kind} table in {table.iterations} sweeps ({wall:.2f}s) -> {out}")
    return EXIT_OK


def cmd_simulate(args, cfg: Config) -> int:
    exp = Experiment(cfg, args.seed)
    rows = exp.run(threads=args.threads)
    with _output(_out_path(args, cfg)) as fh:
        write_rows(rows, exp.columns(), fh)
    return EXIT_OK


def cmd_genlog(args, cfg: Config) -> int:
    g = cfg.section("genlog")
    keywords = {str(k): tuple(v) for k, v in g.get("keywords", {"2": [-2.8, 0.7]}).items()}
    seed = args.seed if args.seed is not None else int(g.get("seed", 0))
    with _output(_out_path(args, cfg)) as fh:
        n = generate_synthetic_log(
            fh,
            keywords,
            n_buckets=int(g.get("buckets", 384)),
            records_per_bucket=int(g.get("records_per_bucket", 25)),
            n_advertisers=int(g.get("advertisers", 100)),
            seed=seed,
            start_bucket=int(g.get("start_bucket", 0)),
        )
    log.info("wrote %d records", n)
    return EXIT_OK


def cmd_validate(args, cfg: Config) -> int:
    if args.table is None:
        raise ConfigError("validate needs --table")
    exp = Experiment(cfg, args.seed)
    table = load_table(args.table)
    v = cfg.section("validate")
    point = exp.resolve(_first_point(exp))
    model = exp.market.model(point.p, point.delta, point.male_value_ratio)
    b_max = max(model.default_b_max(), 2.0 * max(model.v_m, model.v_w))
    step = b_max / int(v.get("grid_points", 2000))
    tolerance = float(v.get("tolerance_steps", 2)) * step
    reports = check_table(table, model, step, b_max)
    if args.out is not None:
        write_reports(reports, args.out)
    bad = [r for r in reports if r.gap > tolerance]
    for r in bad:
        print(f"FAIL {r.state} theta={r.theta}: grid argmax {r.best_bid:.6g} vs phi {r.phi_bid:.6g}", file=sys.stderr)
    worst = max((r.gap for r in reports), default=0.0)
    print(f"checked {len(reports)} states, worst gap {worst:.3g} (tolerance {tolerance:.3g}), {len(bad)} failures")
    return EXIT_VALIDATION if bad else EXIT_OK


def cmd_stationarity(args, cfg: Config) -> int:
    s = cfg.section("stationarity")
    path = cfg.resolve(s.get("log", "data/yahoo_like.csv"))
    if not path.exists():
        raise ConfigError(f"bid log {path} not found")
    with open(path, "rb") as fh:
        bid_log = parse_bid_log(fh)
    keyword = str(s.get("keyword", "2"))
    first = tuple(s.get("first", [0, 192]))
    second = tuple(s.get("second", [192, 384]))
    stat = stationarity_distance(empirical_cdf_for(bid_log, keyword, first), empirical_cdf_for(bid_log, keyword, second))
    with _output(_out_path(args, cfg)) as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(("keyword", "first_start", "first_stop", "second_start", "second_stop", "ks_statistic"))
        writer.writerow((keyword, *first, *second, repr(stat)))
    return EXIT_OK


COMMANDS = {
    "solve": cmd_solve,
    "simulate": cmd_simulate,
    "genlog": cmd_genlog,
    "validate": cmd_validate,
    "stationarity": cmd_stationarity,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fairbid", description="Optimal bidding under gender-parity constraints.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="TOML experiment config")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--out", default=None, help="output path ('-' for stdout)")
        p.add_argument("--threads", type=int, default=1, help="grid points simulated concurrently")
        p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE", help="override a config entry")
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "validate":
            p.add_argument("--table", default=None, help="table file written by 'solve'")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = Config.load(args.config, args.set)
        return COMMANDS[args.command](args, cfg)
    except NonConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        print("delta trace (last 20): " + " ".join(f"{d:.3e}" for d in exc.trace[-20:]), file=sys.stderr)
        return EXIT_NONCONVERGENCE
    except (ConfigError, InsufficientDataError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FairbidError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
