"""Synthetic segment tasks, experiment orchestration, and result files.

A segment task models output whose semantic units vary in length: contiguous
segments tile the sequence, and the oracle denoiser discounts finalized
context that lies in a different segment than the position being scored.
Experiments sweep (strategy, f, r, seed) cells, writing one trace file per
run, a per-run summary CSV, and a per-cell aggregate CSV.
"""

from __future__ import annotations

import csv
import io
import json
import os
import shlex
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

from .denoise import (
    DenoiserSession,
    OracleParams,
    OracleSession,
    UniformSession,
    open_external,
)
from .detrand import ROLE_TASK_LEN, ROLE_TASK_TOKEN, mix
from .errors import DomainError, MaskschedError
from .metrics import accounting, annotate_mhco
from .sched import ScheduleConfig, run_decode
from .traceio import write_trace

SUMMARY_FIELDS = [
    "strategy",
    "f",
    "r",
    "b",
    "seed",
    "exact_match",
    "mean_mhco",
    "forward_passes",
    "token_updates",
    "violations",
    "status",
    "wall_ms",
]

AGGREGATE_FIELDS = [
    "strategy",
    "f",
    "r",
    "b",
    "runs",
    "exact_match_mean",
    "exact_match_std",
    "mean_mhco_mean",
    "mean_mhco_std",
    "forward_passes_mean",
    "token_updates_mean",
]


@dataclass
class SegmentTask:
    """Ground-truth tokens plus a segment tiling of [0, n)."""

    target: list[int]
    segments: list[tuple[int, int]]
    seed: int

    def segment_ids(self) -> list[int]:
        ids = [0] * len(self.target)
        for idx, (start, length) in enumerate(self.segments):
            for p in range(start, start + length):
                ids[p] = idx
        return ids

    def to_dict(self) -> dict:
        return {
            "target": self.target,
            "segments": [[s, l] for s, l in self.segments],
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SegmentTask":
        return cls(
            target=list(d["target"]),
            segments=[(s, l) for s, l in d["segments"]],
            seed=d["seed"],
        )


def gen_task(n: int, v: int, min_len: int, max_len: int, seed: int) -> SegmentTask:
    """Deterministic task: segment lengths uniform on [min_len, max_len]
    (last segment truncated to fit), tokens uniform on [0, v)."""
    if v < 2:
        raise DomainError(f"vocab size must be >= 2, got {v}")
    if not 1 <= min_len <= max_len <= n:
        raise DomainError(
            f"need 1 <= min_len <= max_len <= n, got {min_len}, {max_len}, {n}"
        )
    span = max_len - min_len + 1
    segments: list[tuple[int, int]] = []
    pos = 0
    i = 0
    while pos < n:
        length = min_len + mix(seed, ROLE_TASK_LEN, i) % span
        length = min(length, n - pos)
        segments.append((pos, length))
        pos += length
        i += 1
    target = [mix(seed, ROLE_TASK_TOKEN, p) % v for p in range(n)]
    return SegmentTask(target=target, segments=segments, seed=seed)


def make_session(
    kind: str,
    seed: int,
    vocab_size: int,
    task: SegmentTask | None = None,
    oracle_params: OracleParams | None = None,
    external_cmd: str | None = None,
) -> DenoiserSession:
    if kind == "uniform":
        return UniformSession(seed, vocab_size)
    if kind == "oracle":
        if task is None:
            raise DomainError("oracle denoiser requires a task")
        return OracleSession(
            oracle_params or OracleParams(),
            seed,
            vocab_size,
            task.target,
            task.segment_ids(),
        )
    if kind == "external":
        if not external_cmd:
            raise DomainError("external denoiser requires a command")
        return open_external(shlex.split(external_cmd), seed, vocab_size)
    raise DomainError(f"unknown denoiser kind {kind!r}")


@dataclass
class ExperimentSpec:
    """A sweep over strategies, frontier sizes, radii, and seeds."""

    strategies: list[str]
    f_values: list[int]
    r_values: list[int]
    seeds: list[int]
    n: int = 128
    steps: int = 32
    b: int = 8
    vocab_size: int = 64
    seg_min: int = 3
    seg_max: int = 20
    denoiser: str = "oracle"
    oracle: OracleParams = field(default_factory=OracleParams)
    expand_variant: str = "setdef"
    nout_variant: str = "poststep"
    full_scores: bool = False

    def validate(self) -> None:
        if not self.strategies:
            raise DomainError("spec needs at least one strategy")
        if not self.seeds:
            raise DomainError("spec needs at least one seed")
        if not self.f_values or not self.r_values:
            raise DomainError("spec needs non-empty f and r value lists")

    def cells(self) -> list[tuple[str, int, int, int]]:
        return [
            (strategy, f, r, seed)
            for strategy in self.strategies
            for f in self.f_values
            for r in self.r_values
            for seed in self.seeds
        ]

    @classmethod
    def from_json_file(cls, path: str) -> "ExperimentSpec":
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
        oracle = OracleParams(**raw.pop("oracle", {}))
        return cls(oracle=oracle, **raw)


@dataclass
class RunRow:
    strategy: str
    f: int
    r: int
    b: int
    seed: int
    exact_match: float | None
    mean_mhco: float | None
    forward_passes: int
    token_updates: int
    violations: int
    status: str
    wall_ms: float

    def sort_key(self):
        return (self.strategy, self.f, self.r, self.seed)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def run_one(
    spec: ExperimentSpec, strategy: str, f: int, r: int, seed: int,
    out_dir: str | None,
) -> RunRow:
    task = gen_task(spec.n, spec.vocab_size, spec.seg_min, spec.seg_max, seed)
    cfg = ScheduleConfig(
        n=spec.n,
        steps=spec.steps,
        f=f,
        r=r,
        b=spec.b,
        strategy=strategy,
        seed=seed,
        expand_variant=spec.expand_variant,
        nout_variant=spec.nout_variant,
        full_scores=spec.full_scores,
    )
    session = make_session(spec.denoiser, seed, spec.vocab_size, task, spec.oracle)
    start = time.perf_counter()
    try:
        trace = run_decode(cfg, session)
    finally:
        session.close()
    wall_ms = (time.perf_counter() - start) * 1000.0
    trace.task = task.to_dict()
    annotate_mhco(trace)
    metric = accounting(trace)
    if out_dir is not None:
        name = f"{strategy}_f{f}_r{r}_seed{seed}.jsonl"
        write_trace(trace, os.path.join(out_dir, name))
    return RunRow(
        strategy=strategy,
        f=f,
        r=r,
        b=spec.b,
        seed=seed,
        exact_match=metric.exact_match,
        mean_mhco=metric.mean_mhco,
        forward_passes=metric.forward_passes,
        token_updates=metric.token_updates,
        violations=len(metric.violations),
        status=trace.status,
        wall_ms=wall_ms,
    )


def _mean(values: list[float]) -> float:
    return sum(values) / len(values)


def _std(values: list[float]) -> float:
    # Sample standard deviation; 0.0 for a single observation.
    if len(values) < 2:
        return 0.0
    m = _mean(values)
    return (sum((v - m) ** 2 for v in values) / (len(values) - 1)) ** 0.5


def aggregate_rows(rows: list[RunRow]) -> list[dict]:
    cells: dict[tuple, list[RunRow]] = {}
    for row in rows:
        cells.setdefault((row.strategy, row.f, row.r, row.b), []).append(row)
    out = []
    for (strategy, f, r, b), members in sorted(cells.items()):
        ems = [m.exact_match for m in members if m.exact_match is not None]
        mhcos = [m.mean_mhco for m in members if m.mean_mhco is not None]
        out.append(
            {
                "strategy": strategy,
                "f": f,
                "r": r,
                "b": b,
                "runs": len(members),
                "exact_match_mean": _mean(ems) if ems else None,
                "exact_match_std": _std(ems) if ems else None,
                "mean_mhco_mean": _mean(mhcos) if mhcos else None,
                "mean_mhco_std": _std(mhcos) if mhcos else None,
                "forward_passes_mean": _mean([float(m.forward_passes) for m in members]),
                "token_updates_mean": _mean([float(m.token_updates) for m in members]),
            }
        )
    return out


def rows_to_csv(rows: list[RunRow]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SUMMARY_FIELDS)
    for row in rows:
        writer.writerow(
            [
                row.strategy,
                row.f,
                row.r,
                row.b,
                row.seed,
                _fmt(row.exact_match),
                _fmt(row.mean_mhco),
                row.forward_passes,
                row.token_updates,
                row.violations,
                row.status,
                _fmt(row.wall_ms),
            ]
        )
    return buf.getvalue()


def aggregates_to_csv(aggregates: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGGREGATE_FIELDS)
    for agg in aggregates:
        writer.writerow([_fmt(agg[k]) for k in AGGREGATE_FIELDS])
    return buf.getvalue()


def run_experiment(
    spec: ExperimentSpec, out_dir: str | None = None, workers: int = 1
) -> tuple[list[RunRow], list[dict]]:
    """Execute every (strategy, f, r, seed) cell of the spec.

    Individual run failures become rows with status "error"; the experiment
    always continues.  Row order is deterministic regardless of worker count.
    """
    spec.validate()
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)

    def job(cell: tuple[str, int, int, int]) -> RunRow:
        strategy, f, r, seed = cell
        try:
            return run_one(spec, strategy, f, r, seed, out_dir)
        except MaskschedError as exc:
            return RunRow(
                strategy=strategy,
                f=f,
                r=r,
                b=spec.b,
                seed=seed,
                exact_match=None,
                mean_mhco=None,
                forward_passes=0,
                token_updates=0,
                violations=0,
                status=f"error: {exc}",
                wall_ms=0.0,
            )

    cells = spec.cells()
    if workers <= 1:
        rows = [job(cell) for cell in cells]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(job, cells))
    rows.sort(key=RunRow.sort_key)
    aggregates = aggregate_rows(rows)

    if out_dir is not None:
        with open(os.path.join(out_dir, "summary.csv"), "w", encoding="utf-8") as fh:
            fh.write(rows_to_csv(rows))
        with open(os.path.join(out_dir, "aggregate.csv"), "w", encoding="utf-8") as fh:
            fh.write(aggregates_to_csv(aggregates))
    return rows, aggregates
