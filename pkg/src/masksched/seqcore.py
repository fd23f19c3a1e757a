"""Masked sequences, finalization bookkeeping, and the forward corruption step.

A generation region is N slots indexed 0..N-1; each slot is either MASK
(represented as None) or a finalized token id.  The prompt is never
materialized: it acts as a virtual finalized block at index -1, which only
matters for distance computations.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .detrand import ROLE_CORRUPT, u01
from .errors import DomainError, InvariantViolation, PositionRangeError

MASK = None

# Distance sentinel for "no finalized position in reach".  A distinguished
# integer strictly greater than any realistic N, so distance arithmetic stays
# in ints.
INFINITY = 1 << 62


@dataclass
class GenSequence:
    """The generation region: N slots, each MASK (None) or a token id.

    ``target`` optionally carries the ground-truth tokens of a synthetic
    task; denoisers and metrics may consult it, the schedulers never do.
    """

    slots: list[int | None]
    target: list[int] | None = None

    def __len__(self) -> int:
        return len(self.slots)

    def masked_positions(self) -> set[int]:
        return {i for i, s in enumerate(self.slots) if s is MASK}

    def is_fully_finalized(self) -> bool:
        return all(s is not MASK for s in self.slots)


@dataclass
class DecodeState:
    """A decode in progress: sequence, finalized set, wavefront, step count."""

    sequence: GenSequence
    finalized: set[int] = field(default_factory=set)
    wavefront: set[int] = field(default_factory=set)
    step: int = 0

    @property
    def n(self) -> int:
        return len(self.sequence)

    def masked(self) -> set[int]:
        return self.sequence.masked_positions()


def new_state(n: int, target: list[int] | None = None) -> DecodeState:
    """Fresh all-masked state of length n."""
    if n < 1:
        raise DomainError(f"sequence length must be >= 1, got {n}")
    return DecodeState(sequence=GenSequence(slots=[MASK] * n, target=target))


def dist(i: int, finalized: set[int], n: int, prompt_adjacent: bool = True) -> int:
    """Minimum index distance from position i to the finalized set.

    The virtual prompt position -1 counts as finalized when
    ``prompt_adjacent`` is set (the default), so position 0 is at distance 1
    from the prompt even before anything is finalized.  Returns INFINITY only
    when the set is empty and prompt adjacency is disabled.
    """
    if not 0 <= i < n:
        raise PositionRangeError(f"position {i} out of range for length {n}")
    best = i + 1 if prompt_adjacent else INFINITY
    for j in finalized:
        d = i - j if i >= j else j - i
        if d < best:
            best = d
            if best == 0:
                break
    return best


def within_radius(
    anchor: set[int], r: int, n: int, prompt_adjacent: bool = True
) -> set[int]:
    """All positions j in [0, n) with dist(j, anchor) <= r.

    Equivalent to filtering by dist() but O(|anchor| * r) instead of
    O(n * |anchor|); the hot paths (frontier expansion, score snapshots,
    violation neighborhoods) go through here.
    """
    out: set[int] = set()
    if prompt_adjacent and r >= 1:
        out.update(range(0, min(r, n)))
    for a in anchor:
        lo = a - r if a - r > 0 else 0
        hi = a + r if a + r < n - 1 else n - 1
        out.update(range(lo, hi + 1))
    return out


def corrupt(x0: GenSequence, t: float, seed: int) -> GenSequence:
    """Mask each position of a clean sequence independently with probability t.

    The masking indicator at position p is a pure function of (seed, p, t);
    identical inputs always produce identical output.
    """
    if not 0.0 <= t <= 1.0:
        raise DomainError(f"masking probability must be in [0, 1], got {t}")
    if any(s is MASK for s in x0.slots):
        raise DomainError("corrupt requires a fully finalized input sequence")
    slots: list[int | None] = [
        MASK if u01(seed, ROLE_CORRUPT, p) < t else tok
        for p, tok in enumerate(x0.slots)
    ]
    return GenSequence(slots=slots, target=x0.target)


def finalize(state: DecodeState, assignments: list[tuple[int, int]]) -> DecodeState:
    """Write token assignments into masked slots, returning the new state.

    Every assigned position must currently be masked and positions must be
    distinct.  Violations raise InvariantViolation: the public scheduler path
    can never produce them, so hitting one means a scheduler bug.
    """
    if not assignments:
        return state
    positions = [p for p, _ in assignments]
    if len(set(positions)) != len(positions):
        raise InvariantViolation(f"duplicate positions in assignments: {positions}")
    slots = list(state.sequence.slots)
    for p, tok in assignments:
        if not 0 <= p < len(slots):
            raise PositionRangeError(f"position {p} out of range for length {len(slots)}")
        if slots[p] is not MASK:
            raise InvariantViolation(f"position {p} already finalized")
        slots[p] = tok
    return replace(
        state,
        sequence=GenSequence(slots=slots, target=state.sequence.target),
        finalized=state.finalized | set(positions),
        wavefront=state.wavefront - set(positions),
    )
