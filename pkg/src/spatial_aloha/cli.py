"""Command-line experiment runner.

Commands: ``run``, ``sweep-lambda``, ``sweep-r``, ``oracle`` and
``partition-audit``. Every output file starts with the resolved
configuration as ``# key=value`` comment lines.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from spatial_aloha import analysis, experiments
from spatial_aloha.config import ExperimentConfig, build_config, parse_pairs, parse_radius
from spatial_aloha.errors import ConfigError, DomainError
from spatial_aloha.geometry import DIAMETER, audit_partition

log = logging.getLogger("spatial_aloha")

EXIT_USAGE = 2
EXIT_FAILED = 1


def _grid(text: str, name: str, parse=float) -> list:
    try:
        values = [parse(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(name, f"cannot parse grid {text!r}") from None
    if not values:
        raise ConfigError(name, "grid is empty")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ConfigError(name, "grid must be strictly increasing")
    return values


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", type=Path, help="flat key=value configuration file")
    p.add_argument("--seed", type=int)
    p.add_argument("--horizon", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--workers", type=int, default=None,
                   help="worker processes for replications (default: available processors)")
    p.add_argument("--out", type=Path, help="output directory")
    p.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
                   help="override a configuration key; repeatable")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="spatial-aloha", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one configuration")
    _common(p)
    p.add_argument("--no-trace", action="store_true", help="skip per-slot and per-departure CSV files")

    p = sub.add_parser("sweep-lambda", help="mean delay against the Poisson arrival rate")
    _common(p)
    p.add_argument("--lambdas", required=True, help="comma-separated increasing rates")

    p = sub.add_parser("sweep-r", help="mean delay against the departure radius")
    _common(p)
    p.add_argument("--rs", required=True, help="comma-separated increasing radii in (0, 2R]; '2R' allowed")

    p = sub.add_parser("oracle", help="exact full-clear chain (r >= 2R)")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--out", type=Path, help="also write the stationary pmf here")

    p = sub.add_parser("partition-audit", help="check the bounded-diameter sphere partition")
    p.add_argument("--r", required=True)
    p.add_argument("--samples", type=int, default=100_000, help="coverage sample points")
    p.add_argument("--pairs", type=int, default=1000, help="point pairs per cell")
    p.add_argument("--seed", type=int, default=1)
    return parser


def resolve_config(args) -> ExperimentConfig:
    overrides = parse_pairs(args.overrides)
    for key in ("seed", "horizon", "replications"):
        value = getattr(args, key)
        if value is not None:
            overrides[key] = value
    if args.out is not None:
        overrides["output_dir"] = str(args.out)
    return build_config(args.config, overrides)


def _workers(args) -> int:
    return args.workers if args.workers is not None else experiments.default_workers()


def _print_row(row: dict) -> None:
    print(",".join(experiments.SUMMARY_COLUMNS))
    print(",".join(experiments.fmt(row[c]) for c in experiments.SUMMARY_COLUMNS))


def cmd_run(args) -> int:
    config = resolve_config(args)
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    traces = experiments.run_replications(config, workers=_workers(args),
                                          record_departures=not args.no_trace)
    if not args.no_trace:
        for i, t in enumerate(traces):
            experiments.write_trace_csv(out / f"trace_rep{i:03d}.csv", config, t, i)
            experiments.write_departures_csv(out / f"departures_rep{i:03d}.csv", config, t, i)
    row = experiments.summarize(config, traces).row()
    experiments.write_csv(out / "summary.csv", config, experiments.SUMMARY_COLUMNS, [row])
    _print_row(row)
    return 0


def _sweep(args, configs, filename) -> int:
    base = configs[0][1]
    out = Path(base.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for k, (_, config) in enumerate(configs):
        traces = experiments.run_replications(config, entropy=[config.seed, k], workers=_workers(args))
        row = experiments.summarize(config, traces).row()
        rows.append(row)
        log.info("point %d: %s", k, row)
    experiments.write_csv(out / filename, base, experiments.SUMMARY_COLUMNS, rows,
                          extra=[("grid", ";".join(str(v) for v, _ in configs))])
    print(",".join(experiments.SUMMARY_COLUMNS))
    for row in rows:
        print(",".join(experiments.fmt(row[c]) for c in experiments.SUMMARY_COLUMNS))
    return 0


def cmd_sweep_lambda(args) -> int:
    base = resolve_config(args)
    grid = _grid(args.lambdas, "lambdas")
    if grid[0] <= 0:
        raise ConfigError("lambdas", "rates must be positive")
    configs = [(lam, base.with_overrides(arrival=f"poisson({lam!r})")) for lam in grid]
    return _sweep(args, configs, "sweep_lambda.csv")


def cmd_sweep_r(args) -> int:
    base = resolve_config(args)
    grid = _grid(args.rs, "rs", parse=parse_radius)
    if grid[0] <= 0 or grid[-1] > DIAMETER:
        raise ConfigError("rs", f"radii must lie in (0, 2R] = (0, {DIAMETER!r}]")
    configs = [(r, base.with_overrides(r=r)) for r in grid]
    return _sweep(args, configs, "sweep_r.csv")


def default_n_max(lam: float) -> int:
    return int(60 * lam + 200)


def cmd_oracle(args) -> int:
    n_max = args.n_max if args.n_max is not None else default_n_max(args.lam)
    res = analysis.chain_oracle(args.lam, args.c, n_max)
    print(f"lambda={args.lam!r}")
    print(f"c={args.c!r}")
    print(f"n_max={n_max}")
    print(f"mean_n={res.mean_n!r}")
    print(f"mean_delay_littles={res.mean_delay_littles!r}")
    print(f"truncation_mass={res.truncation_mass!r}")
    print(f"balance_residual={res.residual!r}")
    print(f"iterations={res.iterations}")
    print(f"reliable={res.reliable}")
    if args.out is not None:
        args.out.mkdir(parents=True, exist_ok=True)
        lines = [f"# lambda={args.lam!r}", f"# c={args.c!r}", f"# n_max={n_max}", "n,probability"]
        lines.extend(f"{n},{p!r}" for n, p in enumerate(res.stationary_pmf.tolist()))
        (args.out / "oracle_pmf.csv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return 0 if res.reliable else EXIT_FAILED


def cmd_partition_audit(args) -> int:
    try:
        r = parse_radius(args.r)
    except ValueError:
        raise ConfigError("r", f"cannot parse {args.r!r}") from None
    if not 0.0 < r <= DIAMETER:
        raise ConfigError("r", f"must lie in (0, 2R]; got {r!r}")
    audit = audit_partition(r, np.random.default_rng(args.seed), args.pairs, args.samples)
    print(f"r={r!r}")
    print(f"M={audit.n_cells}")
    worst = max(audit.max_sampled_chord)
    bad = [i for i, d in enumerate(audit.max_sampled_chord) if d > r]
    print(f"max_sampled_chord={worst!r}")
    print(f"diameter_violations={len(bad)}")
    print(f"coverage_points={len(audit.coverage_counts)}")
    print(f"coverage_uncovered={int((audit.coverage_counts == 0).sum())}")
    print(f"coverage_multiple={int((audit.coverage_counts > 1).sum())}")
    print("PASS" if audit.passed else "FAIL")
    return 0 if audit.passed else EXIT_FAILED


COMMANDS = {
    "run": cmd_run,
    "sweep-lambda": cmd_sweep_lambda,
    "sweep-r": cmd_sweep_r,
    "oracle": cmd_oracle,
    "partition-audit": cmd_partition_audit,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
