"""Counter-based deterministic pseudo-randomness.

Every stochastic choice in this library is a pure function of a 64-bit word
stream: a seed, a role tag naming the kind of decision, and the integers that
identify the decision site (position, step, ...).  The mixing function and the
float mappings are frozen in PROTOCOL.md; external denoiser adapters
reimplement them from that document, so do not change any constant here
without revising the protocol version.
"""

from __future__ import annotations

_M64 = (1 << 64) - 1

# Role tags (PROTOCOL.md, "Role tags").  Tags keep independent decision
# streams from colliding even when their site integers coincide.
ROLE_CORRUPT = 1
ROLE_UNIFORM_SCORE = 2
ROLE_UNIFORM_TOKEN = 3
ROLE_ORACLE_NOISE = 4
ROLE_ORACLE_PRED = 5
ROLE_TASK_LEN = 6
ROLE_TASK_TOKEN = 7


def splitmix64(z: int) -> int:
    """One splitmix64 step: advance by the golden-gamma and finalize."""
    z = (z + 0x9E3779B97F4A7C15) & _M64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return z ^ (z >> 31)


def mix(*words: int) -> int:
    """Absorb signed integer words into a 64-bit state, left to right.

    Words are reduced modulo 2**64 (two's complement for negatives) before
    absorption, so any Python int is a valid word.
    """
    h = 0
    for w in words:
        h = splitmix64(h ^ (w & _M64))
    return h


def unit_float(h: int) -> float:
    """Map a 64-bit word to [0, 1) using the top 53 bits."""
    return (h >> 11) * (2.0 ** -53)


def u01(*words: int) -> float:
    """Deterministic pseudo-uniform in [0, 1) for the given word tuple."""
    return unit_float(mix(*words))


def u11(*words: int) -> float:
    """Deterministic pseudo-uniform in [-1, 1) for the given word tuple."""
    return 2.0 * u01(*words) - 1.0
