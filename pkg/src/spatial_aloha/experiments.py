"""Replication fan-out, summary rows and CSV output.

Replication ``i`` of an experiment draws from
``Generator(PCG64(SeedSequence(entropy).spawn(R)[i]))`` where ``entropy`` is
the master seed, or ``[seed, k]`` for the ``k``-th point of a sweep. Worker
processes only change where a replication runs, never its stream.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from spatial_aloha.analysis import (
    INCONCLUSIVE,
    conjecture_bound,
    estimate_mean_delay,
    littles_law_check,
    mean_backlog,
    stationarity_probe,
)
from spatial_aloha.config import ExperimentConfig
from spatial_aloha.engine import Trace, run
from spatial_aloha.geometry import cap_area
from spatial_aloha.traffic import log_moment_finite

SUMMARY_COLUMNS = (
    "lambda", "r", "s_r", "protocol", "mean_delay", "ci_half_width", "mean_n",
    "littles_discrepancy", "bound_e_over_sr", "verdict", "status",
)
TRACE_COLUMNS = ("slot", "n_before", "p", "b_count", "success", "removed", "arrivals")
DEPARTURE_COLUMNS = ("message_id", "arrival_slot", "departure_slot", "delay")


def replication_streams(entropy, replications: int) -> list:
    return [np.random.Generator(np.random.PCG64(s))
            for s in np.random.SeedSequence(entropy).spawn(replications)]


def _one(args):
    config, seed_seq, record = args
    return run(config, np.random.Generator(np.random.PCG64(seed_seq)), record_departures=record)


def run_replications(config: ExperimentConfig, entropy=None, workers: int = 1,
                     record_departures: bool = False) -> list:
    entropy = config.seed if entropy is None else entropy
    children = np.random.SeedSequence(entropy).spawn(config.replications)
    jobs = [(config, s, record_departures) for s in children]
    if workers <= 1 or len(jobs) == 1:
        return [_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_one, jobs))


def default_workers() -> int:
    return os.cpu_count() or 1


@dataclass
class Summary:
    config: ExperimentConfig
    estimate: object
    mean_n: float
    littles: float
    probe: object

    @property
    def lam(self) -> float:
        return self.config.arrival_distribution().mean

    def row(self) -> dict:
        cfg = self.config
        est = self.estimate
        return {
            "lambda": self.lam,
            "r": cfg.r,
            "s_r": cap_area(cfg.r),
            "protocol": cfg.protocol,
            "mean_delay": est.mean_delay,
            "ci_half_width": est.half_width,
            "mean_n": self.mean_n,
            "littles_discrepancy": self.littles,
            "bound_e_over_sr": conjecture_bound(cfg.r) if cfg.r > 0 else math.inf,
            "verdict": self.probe.verdict,
            "status": est.status,
        }


def summarize(config: ExperimentConfig, traces: list) -> Summary:
    warmup = config.warmup_slots
    est = estimate_mean_delay(traces, warmup, config.batches)
    lam = config.arrival_distribution().mean
    littles = littles_law_check(traces, est, lam) if est.status != INCONCLUSIVE else math.nan
    return Summary(config, est, mean_backlog(traces, warmup), littles, stationarity_probe(traces, warmup))


# -- CSV -----------------------------------------------------------------------

def fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def header_block(config: ExperimentConfig, extra=()) -> list[str]:
    lines = config.header_lines()
    lines.append(f"# log_moment_finite={log_moment_finite(config.arrival_distribution())}")
    lines.extend(f"# {k}={v}" for k, v in extra)
    return lines


def write_csv(path, config: ExperimentConfig, columns, rows, extra=()) -> None:
    lines = header_block(config, extra)
    lines.append(",".join(columns))
    lines.extend(",".join(fmt(r[c]) for c in columns) for r in rows)
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_trace_csv(path, config: ExperimentConfig, trace: Trace, replication: int = 0) -> None:
    lines = header_block(config, [("replication", replication)])
    lines.append(",".join(TRACE_COLUMNS))
    success = trace.success
    for n, (nb, p, b, s, v, xi) in enumerate(zip(trace.n_before.tolist(), trace.p.tolist(),
                                                 trace.b_count.tolist(), success.tolist(),
                                                 trace.removed.tolist(), trace.arrivals.tolist())):
        lines.append(f"{n},{nb},{p!r},{b},{s},{v},{xi}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")


def write_departures_csv(path, config: ExperimentConfig, trace: Trace, replication: int = 0) -> None:
    lines = header_block(config, [("replication", replication)])
    lines.append(",".join(DEPARTURE_COLUMNS))
    for i, a, d in zip(trace.departure_id.tolist(), trace.departure_arrival.tolist(),
                       trace.departure_slot.tolist()):
        lines.append(f"{i},{a},{d},{d - a}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
