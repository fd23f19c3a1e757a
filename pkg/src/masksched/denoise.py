"""Denoiser sessions: one forward pass per step over all masked positions.

A session answers score queries deterministically.  Two synthetic denoisers
are built in (uniform and oracle), and ``open_external`` attaches a subprocess
speaking the line-delimited JSON protocol in PROTOCOL.md.  One ``score_all``
call counts as exactly one forward pass, regardless of strategy, which is what
makes the cross-strategy compute comparison exact.
"""

from __future__ import annotations

import json
import os
import select
import subprocess
import time
from dataclasses import dataclass, field

from .detrand import (
    ROLE_ORACLE_NOISE,
    ROLE_ORACLE_PRED,
    ROLE_UNIFORM_SCORE,
    ROLE_UNIFORM_TOKEN,
    mix,
    u01,
    u11,
)
from .errors import (
    DomainError,
    EmptyQueryError,
    HandshakeTimeoutError,
    ProtocolError,
    SpawnError,
    VersionMismatchError,
)
from .seqcore import MASK, DecodeState

PROTOCOL_VERSION = 1
DEFAULT_HANDSHAKE_TIMEOUT = 10.0


@dataclass
class ConfidenceField:
    """Per-position (predicted token, confidence score) for one forward pass.

    The entry domain is exactly the masked positions of the queried state;
    every score lies in [0, 1].
    """

    entries: dict[int, tuple[int, float]]

    def positions(self) -> set[int]:
        return set(self.entries)

    def score(self, j: int) -> float:
        return self.entries[j][1]

    def token(self, j: int) -> int:
        return self.entries[j][0]

    def __len__(self) -> int:
        return len(self.entries)


@dataclass
class OracleParams:
    """Configuration of the context-rewarding synthetic denoiser.

    base:             context-free confidence floor.
    gain:             confidence added per unit of local finalized context.
    window:           half-width w of the context window.
    noise_amp:        amplitude of the deterministic score jitter.
    segment_discount: weight of finalized neighbors from a different segment.
    """

    base: float = 0.1
    gain: float = 0.8
    window: int = 2
    noise_amp: float = 0.05
    segment_discount: float = 0.25

    def validate(self) -> None:
        if not 0.0 <= self.base <= 1.0:
            raise DomainError(f"base must be in [0, 1], got {self.base}")
        if self.gain < 0.0:
            raise DomainError(f"gain must be >= 0, got {self.gain}")
        if self.window < 1:
            raise DomainError(f"window must be >= 1, got {self.window}")
        if self.noise_amp < 0.0:
            raise DomainError(f"noise_amp must be >= 0, got {self.noise_amp}")
        if not 0.0 <= self.segment_discount <= 1.0:
            raise DomainError(
                f"segment_discount must be in [0, 1], got {self.segment_discount}"
            )


class DenoiserSession:
    """Base session type.  Subclasses implement score_all deterministically."""

    kind = "abstract"

    def score_all(self, state: DecodeState, step: int) -> ConfidenceField:
        raise NotImplementedError

    def close(self) -> None:
        pass

    def describe(self) -> dict:
        """JSON-compatible parameter echo recorded in trace headers."""
        raise NotImplementedError

    def _masked_or_raise(self, state: DecodeState) -> list[int]:
        masked = sorted(state.masked())
        if not masked:
            raise EmptyQueryError("score_all on a state with no masked positions")
        return masked


class UniformSession(DenoiserSession):
    """Hash-derived scores and tokens; no dependence on sequence content.

    Scores and predictions follow the echo derivation in PROTOCOL.md exactly,
    so a round trip through the reference external adapter is bit-identical.
    """

    kind = "uniform"

    def __init__(self, seed: int, vocab_size: int):
        if vocab_size < 2:
            raise DomainError(f"vocab_size must be >= 2, got {vocab_size}")
        self.seed = seed
        self.vocab_size = vocab_size

    def score_all(self, state: DecodeState, step: int) -> ConfidenceField:
        entries = {}
        for j in self._masked_or_raise(state):
            score = u01(self.seed, ROLE_UNIFORM_SCORE, j, step)
            token = mix(self.seed, ROLE_UNIFORM_TOKEN, j, step) % self.vocab_size
            entries[j] = (token, score)
        return ConfidenceField(entries)

    def describe(self) -> dict:
        return {"kind": self.kind, "seed": self.seed, "vocab_size": self.vocab_size}


class OracleSession(DenoiserSession):
    """Synthetic denoiser that rewards finalized context near each position.

    Confidence:  s_j = clamp(base + gain * W_j + noise_amp * u, 0, 1) with
    W_j = (sum over finalized p, |p - j| <= w, of weight(p, j)) / (2w) and
    weight 1 for same-segment neighbors, segment_discount otherwise; u is a
    deterministic pseudo-uniform in [-1, 1) keyed on (seed, j, step).

    Prediction:  target[j] when the fixed per-position threshold
    v_j = u01(seed, j) is under s_j, else (target[j] + 1) mod V.  The
    threshold deliberately ignores the step so that a position's prediction
    turns correct, and stays correct, once its context is rich enough.
    """

    kind = "oracle"

    def __init__(
        self,
        params: OracleParams,
        seed: int,
        vocab_size: int,
        target: list[int],
        segment_ids: list[int] | None = None,
    ):
        params.validate()
        if vocab_size < 2:
            raise DomainError(f"vocab_size must be >= 2, got {vocab_size}")
        if segment_ids is not None and len(segment_ids) != len(target):
            raise DomainError("segment_ids length must match target length")
        self.params = params
        self.seed = seed
        self.vocab_size = vocab_size
        self.target = target
        self.segment_ids = segment_ids

    def _context(self, j: int, slots: list[int | None]) -> float:
        p = self.params
        total = 0.0
        lo = max(0, j - p.window)
        hi = min(len(slots) - 1, j + p.window)
        for q in range(lo, hi + 1):
            if q == j or slots[q] is MASK:
                continue
            if self.segment_ids is None or self.segment_ids[q] == self.segment_ids[j]:
                total += 1.0
            else:
                total += p.segment_discount
        return total / (2.0 * p.window)

    def score_all(self, state: DecodeState, step: int) -> ConfidenceField:
        p = self.params
        slots = state.sequence.slots
        entries = {}
        for j in self._masked_or_raise(state):
            s = p.base + p.gain * self._context(j, slots)
            if p.noise_amp > 0.0:
                s += p.noise_amp * u11(self.seed, ROLE_ORACLE_NOISE, j, step)
            s = min(1.0, max(0.0, s))
            if u01(self.seed, ROLE_ORACLE_PRED, j) < s:
                token = self.target[j]
            else:
                token = (self.target[j] + 1) % self.vocab_size
            entries[j] = (token, s)
        return ConfidenceField(entries)

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "vocab_size": self.vocab_size,
            "base": self.params.base,
            "gain": self.params.gain,
            "window": self.params.window,
            "noise_amp": self.params.noise_amp,
            "segment_discount": self.params.segment_discount,
        }


class _LineChannel:
    """Serial request/response over a subprocess's stdio, one JSON per line."""

    def __init__(self, proc: subprocess.Popen, timeout: float):
        self.proc = proc
        self.timeout = timeout
        self._buf = b""

    def send(self, obj: dict) -> None:
        line = json.dumps(obj, sort_keys=True, separators=(",", ":")) + "\n"
        try:
            self.proc.stdin.write(line.encode("utf-8"))
            self.proc.stdin.flush()
        except (BrokenPipeError, OSError) as exc:
            raise ProtocolError(f"adapter pipe closed while sending: {exc}") from exc

    def recv_line(self, timeout: float | None = None) -> bytes:
        limit = self.timeout if timeout is None else timeout
        deadline = time.monotonic() + limit
        fd = self.proc.stdout.fileno()
        while b"\n" not in self._buf:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                raise HandshakeTimeoutError(
                    f"no reply from adapter within {limit:.1f}s"
                )
            ready, _, _ = select.select([fd], [], [], remaining)
            if not ready:
                continue
            chunk = os.read(fd, 65536)
            if not chunk:
                raise ProtocolError("adapter closed stdout mid-conversation")
            self._buf += chunk
        line, self._buf = self._buf.split(b"\n", 1)
        return line

    def recv(self, timeout: float | None = None) -> dict:
        line = self.recv_line(timeout)
        try:
            obj = json.loads(line.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise ProtocolError(f"malformed reply line: {line[:200]!r}") from exc
        if not isinstance(obj, dict):
            raise ProtocolError(f"reply is not a JSON object: {line[:200]!r}")
        return obj


def _check_keys(obj: dict, expected: set[str], what: str) -> None:
    got = set(obj)
    if got != expected:
        raise ProtocolError(
            f"{what} has wrong field set: got {sorted(got)}, want {sorted(expected)}"
        )


class ExternalSession(DenoiserSession):
    """Host side of the external-denoiser protocol (PROTOCOL.md).

    Strict: any unexpected message shape terminates the subprocess and raises
    ProtocolError.  One outstanding request at a time.
    """

    kind = "external"

    def __init__(self, command: list[str], seed: int, vocab_size: int,
                 channel: _LineChannel, proc: subprocess.Popen):
        self.command = command
        self.seed = seed
        self.vocab_size = vocab_size
        self._channel = channel
        self._proc = proc

    def score_all(self, state: DecodeState, step: int) -> ConfidenceField:
        masked = self._masked_or_raise(state)
        slots = [None if s is MASK else s for s in state.sequence.slots]
        self._channel.send(
            {"type": "score", "step": step, "n": len(slots), "slots": slots}
        )
        try:
            reply = self._channel.recv()
            _check_keys(reply, {"type", "step", "entries"}, "scores reply")
            if reply["type"] != "scores":
                raise ProtocolError(f"expected scores reply, got {reply['type']!r}")
            if reply["step"] != step:
                raise ProtocolError(
                    f"scores reply for step {reply['step']}, expected {step}"
                )
            entries: dict[int, tuple[int, float]] = {}
            for item in reply["entries"]:
                if not isinstance(item, dict):
                    raise ProtocolError("entry is not an object")
                _check_keys(item, {"pos", "token", "score"}, "scores entry")
                pos, token, score = item["pos"], item["token"], item["score"]
                if not isinstance(pos, int) or not isinstance(token, int):
                    raise ProtocolError("entry pos/token must be integers")
                if not isinstance(score, (int, float)) or not 0.0 <= score <= 1.0:
                    raise ProtocolError(f"entry score out of [0,1]: {score!r}")
                if pos in entries:
                    raise ProtocolError(f"duplicate entry for position {pos}")
                entries[pos] = (token, float(score))
            if set(entries) != set(masked):
                raise ProtocolError(
                    "entry positions do not match masked positions: "
                    f"got {sorted(entries)}, want {masked}"
                )
            return ConfidenceField(entries)
        except ProtocolError:
            self._terminate()
            raise

    def close(self) -> None:
        if self._proc.poll() is None:
            try:
                self._channel.send({"type": "bye"})
                self._proc.stdin.close()
                self._proc.wait(timeout=5.0)
            except (ProtocolError, subprocess.TimeoutExpired):
                self._terminate()

    def _terminate(self) -> None:
        if self._proc.poll() is None:
            self._proc.kill()
            self._proc.wait()

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "seed": self.seed,
            "vocab_size": self.vocab_size,
            "command": list(self.command),
        }


def open_external(
    command: list[str],
    seed: int,
    vocab_size: int,
    timeout: float = DEFAULT_HANDSHAKE_TIMEOUT,
) -> ExternalSession:
    """Spawn an adapter process and perform the version-1 handshake."""
    try:
        proc = subprocess.Popen(
            command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
        )
    except (OSError, ValueError) as exc:
        raise SpawnError(f"cannot spawn adapter {command!r}: {exc}") from exc
    channel = _LineChannel(proc, timeout)
    try:
        channel.send(
            {
                "type": "hello",
                "version": PROTOCOL_VERSION,
                "seed": seed,
                "vocab_size": vocab_size,
            }
        )
        ack = channel.recv(timeout)
        _check_keys(ack, {"type", "version"}, "handshake ack")
        if ack["type"] != "hello_ack":
            raise ProtocolError(f"expected hello_ack, got {ack['type']!r}")
        if ack["version"] != PROTOCOL_VERSION:
            raise VersionMismatchError(
                f"adapter speaks protocol {ack['version']}, host speaks {PROTOCOL_VERSION}"
            )
    except Exception:
        if proc.poll() is None:
            proc.kill()
            proc.wait()
        raise
    return ExternalSession(command, seed, vocab_size, channel, proc)
