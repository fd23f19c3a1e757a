"""Line-protocol server: handshake, score queries, shutdown.

Strictly serial: one reply line per input line, in order.  Session identity
(seed, vocabulary size, backend) is fixed at handshake and immutable
afterwards.  Protocol shapes and exit statuses follow PROTOCOL.md; on any
malformed or out-of-schema line the adapter emits one error object and
exits with status 3.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, TextIO

from .hashing import echo_score, echo_token

PROTOCOL_VERSION = 1

# A custom hook receives (slots, step) and returns (pos, token, score)
# triples for every null slot.  See README for wiring a real model.
ScoreHook = Callable[[list, int], list[tuple[int, int, float]]]


@dataclass(frozen=True)
class AdapterState:
    seed: int
    vocab_size: int
    backend: str


class _Malformed(Exception):
    pass


def _require_keys(obj: dict, expected: set[str]) -> None:
    if not isinstance(obj, dict) or set(obj) != expected:
        raise _Malformed(f"expected fields {sorted(expected)}")


def _parse_line(line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise _Malformed(f"not valid JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise _Malformed("message is not an object")
    return obj


def _write(out: TextIO, obj: dict) -> None:
    out.write(json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n")
    out.flush()


def _handshake(line: str, backend: str) -> AdapterState:
    hello = _parse_line(line)
    _require_keys(hello, {"type", "version", "seed", "vocab_size"})
    if hello["type"] != "hello":
        raise _Malformed(f"expected hello, got {hello['type']!r}")
    if hello["version"] != PROTOCOL_VERSION:
        raise _Malformed(f"unsupported protocol version {hello['version']!r}")
    if not isinstance(hello["seed"], int) or not isinstance(hello["vocab_size"], int):
        raise _Malformed("seed and vocab_size must be integers")
    if hello["vocab_size"] < 2:
        raise _Malformed("vocab_size must be >= 2")
    return AdapterState(seed=hello["seed"], vocab_size=hello["vocab_size"], backend=backend)


def _score_entries(state: AdapterState, slots: list, step: int,
                   hook: ScoreHook | None) -> list[dict]:
    if state.backend == "custom-hook":
        triples = hook(slots, step)
    else:
        triples = [
            (pos, echo_token(state.seed, pos, step, state.vocab_size),
             echo_score(state.seed, pos, step))
            for pos, slot in enumerate(slots)
            if slot is None
        ]
    return [{"pos": p, "token": t, "score": s} for p, t, s in triples]


def serve(stdin: TextIO, stdout: TextIO, backend: str = "echo",
          hook: ScoreHook | None = None) -> int:
    """Run the protocol loop; returns the process exit status."""
    if backend not in ("echo", "custom-hook"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "custom-hook" and hook is None:
        raise ValueError("custom-hook backend needs a hook callable")
    try:
        first = stdin.readline()
        if not first:
            return 0
        state = _handshake(first, backend)
        _write(stdout, {"type": "hello_ack", "version": PROTOCOL_VERSION})
        for line in stdin:
            msg = _parse_line(line)
            if msg.get("type") == "bye":
                _require_keys(msg, {"type"})
                return 0
            _require_keys(msg, {"type", "step", "n", "slots"})
            if msg["type"] != "score":
                raise _Malformed(f"unexpected message type {msg['type']!r}")
            step, n, slots = msg["step"], msg["n"], msg["slots"]
            if not isinstance(step, int) or not isinstance(n, int):
                raise _Malformed("step and n must be integers")
            if not isinstance(slots, list) or len(slots) != n:
                raise _Malformed("slots must be a list of length n")
            if any(s is not None and not isinstance(s, int) for s in slots):
                raise _Malformed("slots must contain integers or nulls")
            _write(stdout, {
                "type": "scores",
                "step": step,
                "entries": _score_entries(state, slots, step, hook),
            })
        return 0
    except _Malformed as exc:
        _write(stdout, {"type": "error", "message": str(exc)})
        return 3
