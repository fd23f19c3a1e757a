"""Trace files: JSON lines, one header object, one object per executed step,
one final object.  Serialization is canonical (sorted keys, compact
separators, shortest-repr floats), so identical runs produce byte-identical
files.
"""

from __future__ import annotations

import json

from .errors import DomainError
from .sched import RunTrace, ScheduleConfig, StepDecision, StepRecord

TRACE_VERSION = 1


def _dumps(obj: dict) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _step_obj(rec: StepRecord) -> dict:
    d = rec.decision
    return {
        "kind": "step",
        "t": d.step,
        "budget": d.budget,
        "selected": d.selected,
        "spilled": d.spilled,
        "wavefront_before": d.wavefront_before,
        "wavefront_after": d.wavefront_after,
        "assignments": [[p, tok] for p, tok in rec.assignments],
        "scores": {str(p): s for p, s in sorted(rec.scores.items())},
        "forward_passes": rec.forward_passes_so_far,
        "tokens_finalized": rec.tokens_finalized_so_far,
        "mhco": rec.mhco,
    }


def trace_to_lines(trace: RunTrace) -> list[str]:
    header = {
        "kind": "header",
        "version": TRACE_VERSION,
        "config": trace.config.to_dict(),
        "denoiser": trace.denoiser,
        "task": trace.task,
    }
    final = {
        "kind": "final",
        "status": trace.status,
        "error": trace.error,
        "sequence": trace.final_slots,
    }
    return [_dumps(header)] + [_dumps(_step_obj(s)) for s in trace.steps] + [_dumps(final)]


def trace_to_bytes(trace: RunTrace) -> bytes:
    return ("\n".join(trace_to_lines(trace)) + "\n").encode("utf-8")


def write_trace(trace: RunTrace, path: str) -> None:
    with open(path, "wb") as fh:
        fh.write(trace_to_bytes(trace))


def _parse_step(obj: dict) -> StepRecord:
    decision = StepDecision(
        step=obj["t"],
        budget=obj["budget"],
        selected=list(obj["selected"]),
        spilled=list(obj["spilled"]),
        wavefront_before=list(obj["wavefront_before"]),
        wavefront_after=list(obj["wavefront_after"]),
    )
    return StepRecord(
        decision=decision,
        assignments=[(p, tok) for p, tok in obj["assignments"]],
        scores={int(p): s for p, s in obj["scores"].items()},
        forward_passes_so_far=obj["forward_passes"],
        tokens_finalized_so_far=obj["tokens_finalized"],
        mhco=obj["mhco"],
    )


def trace_from_lines(lines: list[str]) -> RunTrace:
    objs = [json.loads(line) for line in lines if line.strip()]
    if not objs or objs[0].get("kind") != "header":
        raise DomainError("trace does not start with a header object")
    if objs[-1].get("kind") != "final":
        raise DomainError("trace does not end with a final object")
    header, final = objs[0], objs[-1]
    if header.get("version") != TRACE_VERSION:
        raise DomainError(f"unsupported trace version {header.get('version')!r}")
    trace = RunTrace(
        config=ScheduleConfig.from_dict(header["config"]),
        denoiser=header["denoiser"],
        task=header["task"],
        status=final["status"],
        error=final["error"],
        final_slots=list(final["sequence"]),
    )
    for obj in objs[1:-1]:
        if obj.get("kind") != "step":
            raise DomainError(f"unexpected object kind {obj.get('kind')!r} in trace body")
        trace.steps.append(_parse_step(obj))
    return trace


def read_trace(path: str) -> RunTrace:
    with open(path, "r", encoding="utf-8") as fh:
        return trace_from_lines(fh.read().splitlines())


def decision_fingerprint(trace: RunTrace) -> bytes:
    """Canonical bytes of the schedule-relevant content of a trace.

    Covers budgets, selections, spills, assignments, score snapshots,
    per-step metric values, and the final sequence; excludes the config echo
    and the frontier bookkeeping, so schedules that make identical decisions
    fingerprint identically even across strategies.
    """
    objs = []
    for rec in trace.steps:
        d = rec.decision
        objs.append(
            {
                "t": d.step,
                "budget": d.budget,
                "selected": d.selected,
                "spilled": d.spilled,
                "assignments": [[p, tok] for p, tok in rec.assignments],
                "scores": {str(p): s for p, s in sorted(rec.scores.items())},
                "mhco": rec.mhco,
            }
        )
    objs.append({"status": trace.status, "sequence": trace.final_slots})
    return ("\n".join(_dumps(o) for o in objs) + "\n").encode("utf-8")
