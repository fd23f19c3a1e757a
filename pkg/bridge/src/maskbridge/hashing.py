"""Deterministic hash per PROTOCOL.md ("Deterministic hash").

Implemented from the protocol document, not from the host library: the two
sides must agree bit-exactly through the written contract alone.
"""

from __future__ import annotations

_M64 = (1 << 64) - 1

ROLE_SCORE = 2
ROLE_TOKEN = 3


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def mix(*words: int) -> int:
    h = 0
    for w in words:
        h = splitmix64(h ^ (w & _M64))
    return h


def u01(*words: int) -> float:
    return (mix(*words) >> 11) * (2.0 ** -53)


def echo_score(seed: int, pos: int, step: int) -> float:
    return u01(seed, ROLE_SCORE, pos, step)


def echo_token(seed: int, pos: int, step: int, vocab_size: int) -> int:
    return mix(seed, ROLE_TOKEN, pos, step) % vocab_size
