"""Reference stdio adapter for the masksched external-denoiser protocol."""

from .adapter import AdapterState, serve
from .hashing import echo_score, echo_token, mix, splitmix64, u01

__version__ = "0.1.0"
