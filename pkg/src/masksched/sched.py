"""The three decoding schedules and the per-run decode loop.

All strategies share the same per-step budget k_t and consume one forward
pass per executed step, so compute parity across strategies holds by
construction.  Tie-breaking everywhere is (score descending, position index
ascending); a total deterministic order is required for reproducible traces
and for the frontier-to-global reduction equivalence.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .denoise import ConfidenceField, DenoiserSession
from .errors import DomainError, ProtocolError
from .seqcore import DecodeState, finalize, new_state, within_radius

STRATEGIES = ("standard", "block", "wavefront")
EXPAND_VARIANTS = ("setdef", "incremental")
NOUT_VARIANTS = ("prestep", "poststep")


@dataclass
class ScheduleConfig:
    """Run configuration shared by all strategies.

    f and r always travel with the config: the frontier strategy schedules
    with them, while for the other strategies they only parameterize the
    priority-violation metric and the score snapshots.
    """

    n: int
    steps: int
    f: int
    r: int
    b: int
    strategy: str
    seed: int
    expand_variant: str = "setdef"
    nout_variant: str = "poststep"
    prompt_adjacent: bool = True
    full_scores: bool = False

    def validate(self) -> None:
        if self.n < 1:
            raise DomainError(f"n must be >= 1, got {self.n}")
        if self.steps < 1:
            raise DomainError(f"steps must be >= 1, got {self.steps}")
        if self.f < 1:
            raise DomainError(f"f must be >= 1, got {self.f}")
        if self.r < 0:
            raise DomainError(f"r must be >= 0, got {self.r}")
        if self.b < 1:
            raise DomainError(f"b must be >= 1, got {self.b}")
        if self.strategy not in STRATEGIES:
            raise DomainError(f"unknown strategy {self.strategy!r}")
        if self.expand_variant not in EXPAND_VARIANTS:
            raise DomainError(f"unknown expand variant {self.expand_variant!r}")
        if self.nout_variant not in NOUT_VARIANTS:
            raise DomainError(f"unknown nout variant {self.nout_variant!r}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "steps": self.steps,
            "f": self.f,
            "r": self.r,
            "b": self.b,
            "strategy": self.strategy,
            "seed": self.seed,
            "expand_variant": self.expand_variant,
            "nout_variant": self.nout_variant,
            "prompt_adjacent": self.prompt_adjacent,
            "full_scores": self.full_scores,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScheduleConfig":
        return cls(**d)


@dataclass
class StepDecision:
    """What one step decided: budget, selection, spill, frontier movement."""

    step: int
    budget: int
    selected: list[int]
    spilled: list[int]
    wavefront_before: list[int]
    wavefront_after: list[int]


@dataclass
class StepRecord:
    """One executed step as stored in a trace.

    ``scores`` snapshots the confidence of every selected position plus every
    pre-step masked position within r of the post-step finalized set, which
    is enough to recompute the priority-violation metric under either
    neighborhood variant and to re-derive the frontier update.
    """

    decision: StepDecision
    assignments: list[tuple[int, int]]
    scores: dict[int, float]
    forward_passes_so_far: int
    tokens_finalized_so_far: int
    mhco: float | None = None


@dataclass
class RunTrace:
    """A full decode: config echo, per-step records, final sequence."""

    config: ScheduleConfig
    denoiser: dict
    steps: list[StepRecord] = field(default_factory=list)
    final_slots: list[int | None] = field(default_factory=list)
    status: str = "completed"
    error: str | None = None
    task: dict | None = None


def step_budget(t: int, n: int, total_steps: int) -> int:
    """Tokens to finalize at step t, spreading n evenly over total_steps.

    k_t = floor(n / T) + 1 for the first (n mod T) steps; the budgets sum to
    exactly n.
    """
    if not 1 <= t <= total_steps:
        raise DomainError(f"step {t} outside 1..{total_steps}")
    base, extra = divmod(n, total_steps)
    return base + (1 if t <= extra else 0)


def init_wavefront(cfg: ScheduleConfig) -> set[int]:
    """Initial frontier: the first min(f, n) positions after the prompt."""
    return set(range(min(cfg.f, cfg.n)))


def _by_rank(field_: ConfidenceField):
    """Sort key for (score descending, index ascending)."""
    return lambda j: (-field_.score(j), j)


def select_standard(field_: ConfidenceField, k: int) -> list[int]:
    """Global top-k masked positions by confidence."""
    if k <= 0:
        return []
    ranked = sorted(field_.positions(), key=_by_rank(field_))
    return ranked[:k]


def select_block(
    field_: ConfidenceField, state: DecodeState, k: int, b: int
) -> list[int]:
    """Top-k within the lowest-indexed block holding masked positions.

    A block with fewer than k masked positions is finished first, then
    selection overflows into the following blocks in ascending order.
    """
    if k <= 0:
        return []
    masked = field_.positions()
    by_block: dict[int, list[int]] = {}
    for j in masked:
        by_block.setdefault(j // b, []).append(j)
    selected: list[int] = []
    for blk in sorted(by_block):
        room = k - len(selected)
        if room <= 0:
            break
        selected.extend(sorted(by_block[blk], key=_by_rank(field_))[:room])
    return selected


def wavefront_step(
    field_: ConfidenceField, state: DecodeState, k: int, cfg: ScheduleConfig
) -> StepDecision:
    """One frontier step: select within the wavefront, spill, expand, prune.

    1. SELECT  top-min(k, |W|) wavefront positions by confidence.
    2. SPILL   if short of k, add the best masked positions outside W,
               ranked globally, until the budget is met or masks run out.
    3. EXPAND  candidates are the still-masked positions within r of the
               updated finalized set (cumulative by default; the
               "incremental" variant only unions neighbors of this step's
               finalizations into the surviving frontier).
    4. PRUNE   keep the top-f candidates by this step's cached scores.

    The caller applies the finalization; the decision already reflects it in
    wavefront_after.
    """
    masked = field_.positions()
    wave = sorted(state.wavefront)
    rank = _by_rank(field_)

    in_wave = sorted((j for j in wave if j in masked), key=rank)
    selected = in_wave[: min(k, len(in_wave))]
    spilled: list[int] = []
    if len(selected) < k:
        outside = sorted((j for j in masked if j not in state.wavefront), key=rank)
        spilled = outside[: k - len(selected)]
        selected = selected + spilled

    selected_set = set(selected)
    c_post = state.finalized | selected_set
    masked_after = masked - selected_set
    if cfg.expand_variant == "setdef":
        candidates = masked_after & within_radius(
            c_post, cfg.r, cfg.n, cfg.prompt_adjacent
        )
    else:
        survivors = (state.wavefront - selected_set) & masked_after
        grown = masked_after & within_radius(selected_set, cfg.r, cfg.n, False)
        candidates = survivors | grown
    if len(candidates) > cfg.f:
        wavefront_after = sorted(sorted(candidates, key=rank)[: cfg.f])
    else:
        wavefront_after = sorted(candidates)

    return StepDecision(
        step=state.step + 1,
        budget=k,
        selected=selected,
        spilled=spilled,
        wavefront_before=wave,
        wavefront_after=wavefront_after,
    )


def _snapshot(
    field_: ConfidenceField,
    selected: list[int],
    finalized_post: set[int],
    cfg: ScheduleConfig,
) -> dict[int, float]:
    """Scores kept in the trace for this step (see StepRecord)."""
    if cfg.full_scores:
        return {j: field_.score(j) for j in sorted(field_.positions())}
    keep = set(selected) | (
        field_.positions()
        & within_radius(finalized_post, cfg.r, cfg.n, cfg.prompt_adjacent)
    )
    return {j: field_.score(j) for j in sorted(keep)}


def run_decode(cfg: ScheduleConfig, session: DenoiserSession) -> RunTrace:
    """Run one decode to completion (or denoiser failure).

    Each executed step performs exactly one score_all call, one selection,
    and one finalization.  The run ends early once every position is
    finalized; a protocol error from the denoiser aborts the run, returning
    the partial trace with status "aborted".
    """
    cfg.validate()
    state = new_state(cfg.n)
    if cfg.strategy == "wavefront":
        state = replace(state, wavefront=init_wavefront(cfg))
    trace = RunTrace(config=cfg, denoiser=session.describe())
    tokens_done = 0

    for t in range(1, cfg.steps + 1):
        if not state.masked():
            break
        k = step_budget(t, cfg.n, cfg.steps)
        try:
            field_ = session.score_all(state, t)
        except ProtocolError as exc:
            trace.status = "aborted"
            trace.error = str(exc)
            break

        if cfg.strategy == "standard":
            selected = select_standard(field_, k)
            decision = StepDecision(t, k, selected, [], [], [])
        elif cfg.strategy == "block":
            selected = select_block(field_, state, k, cfg.b)
            decision = StepDecision(t, k, selected, [], [], [])
        else:
            decision = wavefront_step(field_, state, k, cfg)
            selected = decision.selected

        assignments = [(j, field_.token(j)) for j in selected]
        state = finalize(state, assignments)
        state = replace(state, step=t)
        if cfg.strategy == "wavefront":
            state = replace(state, wavefront=set(decision.wavefront_after))

        tokens_done += len(selected)
        trace.steps.append(
            StepRecord(
                decision=decision,
                assignments=assignments,
                scores=_snapshot(field_, selected, state.finalized, cfg),
                forward_passes_so_far=t,
                tokens_finalized_so_far=tokens_done,
            )
        )

    trace.final_slots = list(state.sequence.slots)
    if trace.status != "aborted" and state.masked():
        trace.status = "incomplete"
    return trace
