"""Priority-violation metric, compute accounting, exact match, trace checks.

The per-step priority-violation fraction counts selected positions that were
strictly out-scored by some unselected masked position within radius r of the
finalized set.  The neighborhood is anchored on the finalized set as updated
by the step's own finalizations (the step-t finalized set); anchoring on the
pre-step set instead is available as the "prestep" variant for ablation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import DomainError, InsufficientTraceError, UndefinedMetricError
from .sched import RunTrace, init_wavefront, step_budget
from .seqcore import within_radius


@dataclass
class RunMetric:
    """Per-run aggregate: violations list is empty for a clean run."""

    mean_mhco: float | None
    exact_match: float | None
    forward_passes: int
    token_updates: int
    violations: list[str] = field(default_factory=list)


def mhco_step(selected: dict[int, float], outside: dict[int, float]) -> float:
    """Fraction of selected positions strictly out-scored by some outside one.

    Ties never count as violations; an empty outside set yields 0.0 exactly.
    """
    if not selected:
        raise UndefinedMetricError("priority-violation metric undefined for empty selection")
    if not outside:
        return 0.0
    max_out = max(outside.values())
    violated = sum(1 for s in selected.values() if max_out > s)
    return violated / len(selected)


def _replay_steps(trace: RunTrace):
    """Yield (record, masked_before, finalized_before) walking the trace."""
    n = trace.config.n
    masked = set(range(n))
    finalized: set[int] = set()
    for rec in trace.steps:
        yield rec, set(masked), set(finalized)
        sel = set(rec.decision.selected)
        masked -= sel
        finalized |= sel


def _nout(
    rec, masked_before: set[int], finalized_before: set[int],
    n: int, r: int, variant: str, prompt_adjacent: bool,
) -> set[int]:
    sel = set(rec.decision.selected)
    anchor = finalized_before if variant == "prestep" else finalized_before | sel
    return (masked_before - sel) & within_radius(anchor, r, n, prompt_adjacent)


def _step_mhco_from_trace(
    rec, masked_before, finalized_before, cfg, r: int, variant: str
) -> float:
    nout = _nout(
        rec, masked_before, finalized_before, cfg.n, r, variant, cfg.prompt_adjacent
    )
    try:
        sel_scores = {j: rec.scores[j] for j in rec.decision.selected}
        out_scores = {j: rec.scores[j] for j in nout}
    except KeyError as exc:
        raise InsufficientTraceError(
            f"step {rec.decision.step} snapshot lacks a score for position {exc.args[0]}"
        ) from exc
    return mhco_step(sel_scores, out_scores)


def mhco_per_step(
    trace: RunTrace, r: int | None = None, variant: str | None = None
) -> list[tuple[int, float]]:
    """(step, value) for every step with a non-empty selection."""
    cfg = trace.config
    r = cfg.r if r is None else r
    variant = cfg.nout_variant if variant is None else variant
    if variant not in ("prestep", "poststep"):
        raise DomainError(f"unknown nout variant {variant!r}")
    out = []
    for rec, masked_before, finalized_before in _replay_steps(trace):
        if not rec.decision.selected:
            continue
        out.append(
            (
                rec.decision.step,
                _step_mhco_from_trace(rec, masked_before, finalized_before, cfg, r, variant),
            )
        )
    return out


def mhco_run(
    trace: RunTrace, r: int | None = None, variant: str | None = None
) -> float:
    """Arithmetic mean of the per-step values over non-empty selections."""
    values = mhco_per_step(trace, r, variant)
    if not values:
        raise UndefinedMetricError("trace has no steps with a non-empty selection")
    return sum(v for _, v in values) / len(values)


def annotate_mhco(trace: RunTrace) -> RunTrace:
    """Fill each step record's mhco field using the trace's own r/variant."""
    values = dict(mhco_per_step(trace))
    for rec in trace.steps:
        rec.mhco = values.get(rec.decision.step)
    return trace


def exact_match(trace: RunTrace, target: list[int] | None) -> float:
    """Fraction of positions whose final token equals the target token."""
    if target is None:
        raise DomainError("exact_match requires a target sequence")
    if len(target) != len(trace.final_slots):
        raise DomainError("target length does not match trace sequence length")
    hits = sum(1 for got, want in zip(trace.final_slots, target) if got == want)
    return hits / len(target)


def accounting(trace: RunTrace) -> RunMetric:
    """Count forward passes and token updates, flagging bound violations.

    Violations are reported in the result, never raised.  mean_mhco and
    exact_match are filled when the trace carries what they need.
    """
    cfg = trace.config
    passes = len(trace.steps)
    updates = sum(len(rec.decision.selected) for rec in trace.steps)
    violations: list[str] = []

    if passes > cfg.steps:
        violations.append(f"forward passes {passes} exceed step budget {cfg.steps}")
    for rec in trace.steps:
        k = step_budget(rec.decision.step, cfg.n, cfg.steps)
        if len(rec.decision.selected) > k:
            violations.append(
                f"step {rec.decision.step} finalized {len(rec.decision.selected)} > budget {k}"
            )
    if trace.status == "completed" and updates != cfg.n:
        violations.append(f"completed run finalized {updates} tokens, expected {cfg.n}")
    if cfg.strategy == "wavefront":
        if updates > cfg.f * cfg.steps:
            violations.append(
                f"token updates {updates} exceed frontier bound {cfg.f * cfg.steps}"
            )

    mean = None
    if trace.steps:
        stored = [rec.mhco for rec in trace.steps if rec.decision.selected]
        if stored and all(v is not None for v in stored):
            mean = sum(stored) / len(stored)
        else:
            try:
                mean = mhco_run(trace)
            except (InsufficientTraceError, UndefinedMetricError):
                mean = None

    em = None
    if trace.task and trace.task.get("target") is not None:
        em = exact_match(trace, trace.task["target"])

    return RunMetric(
        mean_mhco=mean,
        exact_match=em,
        forward_passes=passes,
        token_updates=updates,
        violations=violations,
    )


def verify_trace(trace: RunTrace) -> list[str]:
    """Replay a trace against its config; return all invariant violations.

    Structural checks never need score data.  Ranking checks (frontier
    selection order and the frontier update) run whenever the snapshot holds
    the scores they need, which it does for every set-definition trace.
    """
    cfg = trace.config
    problems: list[str] = []
    try:
        cfg.validate()
    except DomainError as exc:
        return [f"config invalid: {exc}"]

    vocab = trace.denoiser.get("vocab_size")
    n = cfg.n
    masked = set(range(n))
    finalized: set[int] = set()
    slots: list[int | None] = [None] * n
    prev_wave: list[int] = sorted(init_wavefront(cfg)) if cfg.strategy == "wavefront" else []
    expected_t = 1
    tokens_so_far = 0

    for idx, rec in enumerate(trace.steps):
        d = rec.decision
        tag = f"step {d.step}"
        if d.step != expected_t:
            problems.append(f"{tag}: expected step index {expected_t}")
        expected_t = d.step + 1

        k = step_budget(d.step, n, cfg.steps) if 1 <= d.step <= cfg.steps else -1
        if d.budget != k:
            problems.append(f"{tag}: recorded budget {d.budget}, expected {k}")
        want = min(k, len(masked)) if k >= 0 else len(d.selected)
        if len(d.selected) != want:
            problems.append(f"{tag}: selected {len(d.selected)} positions, expected {want}")
        sel_set = set(d.selected)
        if len(sel_set) != len(d.selected):
            problems.append(f"{tag}: duplicate selected positions")
        if not sel_set <= masked:
            problems.append(f"{tag}: selected positions not all masked")
        if [p for p, _ in rec.assignments] != d.selected:
            problems.append(f"{tag}: assignments do not match selection order")
        if vocab is not None and any(
            not 0 <= tok < vocab for _, tok in rec.assignments
        ):
            problems.append(f"{tag}: assigned token outside vocabulary")

        spill_set = set(d.spilled)
        if not spill_set <= sel_set:
            problems.append(f"{tag}: spilled positions not a subset of selected")
        if spill_set & set(d.wavefront_before):
            problems.append(f"{tag}: spilled positions inside the wavefront")

        if rec.forward_passes_so_far != idx + 1:
            problems.append(f"{tag}: forward-pass counter mismatch")
        tokens_so_far += len(d.selected)
        if rec.tokens_finalized_so_far != tokens_so_far:
            problems.append(f"{tag}: finalized-token counter mismatch")

        if cfg.strategy == "block":
            done = set(finalized)
            for p in d.selected:
                blk = p // cfg.b
                if any(q not in done for q in range(0, blk * cfg.b) if q < n):
                    problems.append(
                        f"{tag}: position {p} selected while an earlier block has masks"
                    )
                    break
                done.add(p)

        if cfg.strategy == "wavefront":
            if d.wavefront_before != prev_wave:
                problems.append(f"{tag}: wavefront_before does not chain from previous step")
            wave_masked = [j for j in d.wavefront_before if j in masked]
            non_spilled = [p for p in d.selected if p not in spill_set]
            if len(non_spilled) != min(k, len(wave_masked)) and k >= 0:
                problems.append(f"{tag}: wavefront selection count wrong")
            if not set(non_spilled) <= set(wave_masked):
                problems.append(f"{tag}: non-spilled selection outside the wavefront")
            if set(d.wavefront_after) & sel_set:
                problems.append(f"{tag}: wavefront_after contains finalized positions")
            if len(d.wavefront_after) > cfg.f:
                problems.append(f"{tag}: wavefront_after larger than f")
            if not set(d.wavefront_after) <= (masked - sel_set):
                problems.append(f"{tag}: wavefront_after not a subset of masked positions")
            if set(non_spilled) <= set(rec.scores):
                have = {j for j in wave_masked if j in rec.scores}
                if have == set(wave_masked):
                    ranked = sorted(wave_masked, key=lambda j: (-rec.scores[j], j))
                    if ranked[: len(non_spilled)] != non_spilled:
                        problems.append(f"{tag}: wavefront selection not top-ranked")
            if cfg.expand_variant == "setdef":
                c_post = finalized | sel_set
                cand = (masked - sel_set) & within_radius(
                    c_post, cfg.r, n, cfg.prompt_adjacent
                )
                if cand <= set(rec.scores):
                    if len(cand) > cfg.f:
                        expect = sorted(
                            sorted(cand, key=lambda j: (-rec.scores[j], j))[: cfg.f]
                        )
                    else:
                        expect = sorted(cand)
                    if expect != d.wavefront_after:
                        problems.append(f"{tag}: wavefront_after does not match recomputation")
            prev_wave = d.wavefront_after

        for p, tok in rec.assignments:
            if slots[p] is not None:
                problems.append(f"{tag}: position {p} finalized twice")
            slots[p] = tok
        masked -= sel_set
        finalized |= sel_set

    if trace.status == "completed":
        if masked:
            problems.append(f"completed trace leaves {len(masked)} positions masked")
        if finalized != set(range(n)):
            problems.append("completed trace does not cover every position exactly once")
    if slots != trace.final_slots:
        problems.append("final sequence does not match replayed assignments")
    return problems
