"""Hierarchical deterministic random streams.

Every random draw in a run is keyed by
``(master_seed, stream, worker, round, phase, attempt)``.  The tuple is
packed bijectively into a 128-bit Philox key: distinct keys give
independent counter-based streams, equal keys give bit-identical
sequences.  That is what lets the server re-run any worker's sampling
during a check of computations.

``key_stream`` returns a fresh generator (safe to hold across many
draws, e.g. while generating a problem).  The ``draw_*`` helpers reuse a
thread-local generator and reset its state per call; they are atomic
(key in, values out) and exist because the hot simulation path performs
hundreds of thousands of tiny keyed draws.
"""

from __future__ import annotations

import threading
from enum import IntEnum

import numpy as np

from .errors import ConfigError

_WORKER_BITS, _ROUND_BITS, _PHASE_BITS, _ATTEMPT_BITS = 16, 30, 2, 12
_MASK64 = (1 << 64) - 1


class Stream(IntEnum):
    """Namespace component of an rng key; one per source of randomness."""

    GAME = 0      # problem generation
    GRAD = 1      # per-worker stochastic oracle draws
    ATTACK = 2    # noise used inside crafted Byzantine vectors
    VIOLATOR = 3  # which Byzantines deviate this round
    BUCKET = 4    # bucketing permutation
    CHECK = 5     # checker/checked pair selection
    SIGMA = 6     # variance estimation draws
    PROBE = 7     # miscellaneous probes


def pack_key(master_seed: int, stream: Stream, worker: int = 0, round_: int = 0,
             phase: int = 0, attempt: int = 0) -> tuple[int, int]:
    """Bijective map of the key tuple onto two 64-bit Philox key words."""
    if not (0 <= worker < (1 << _WORKER_BITS)):
        raise ConfigError(f"worker id {worker} outside the key schedule range")
    if not (0 <= round_ < (1 << _ROUND_BITS)):
        raise ConfigError(f"round {round_} outside the key schedule range")
    if not (0 <= phase < (1 << _PHASE_BITS)):
        raise ConfigError(f"phase {phase} outside the key schedule range")
    if not (0 <= attempt < (1 << _ATTEMPT_BITS)):
        raise ConfigError(f"attempt {attempt} outside the key schedule range")
    word1 = (int(stream) << (_WORKER_BITS + _ROUND_BITS + _PHASE_BITS + _ATTEMPT_BITS)
             | worker << (_ROUND_BITS + _PHASE_BITS + _ATTEMPT_BITS)
             | round_ << (_PHASE_BITS + _ATTEMPT_BITS)
             | phase << _ATTEMPT_BITS
             | attempt)
    return int(master_seed) & _MASK64, word1


def key_stream(master_seed: int, stream: Stream, worker: int = 0, round_: int = 0,
               phase: int = 0, attempt: int = 0) -> np.random.Generator:
    """Fresh generator for one key. Equal keys -> equal bit streams."""
    w0, w1 = pack_key(master_seed, stream, worker, round_, phase, attempt)
    return np.random.Generator(np.random.Philox(key=np.array([w0, w1], dtype=np.uint64)))


_tls = threading.local()


def _local_gen() -> tuple[np.random.Philox, np.random.Generator]:
    pair = getattr(_tls, "pair", None)
    if pair is None:
        philox = np.random.Philox(key=np.zeros(2, dtype=np.uint64))
        pair = (philox, np.random.Generator(philox))
        _tls.pair = pair
    return pair


def _reset(philox: np.random.Philox, w0: int, w1: int) -> None:
    st = philox.state
    inner = st["state"]
    inner["key"][0] = w0
    inner["key"][1] = w1
    inner["counter"][:] = 0
    st["buffer_pos"] = 4
    st["has_uint32"] = 0
    st["uinteger"] = 0
    philox.state = st


def draw_integers(key: tuple[int, int], high: int, size: int) -> np.ndarray:
    """Atomic keyed draw of ``size`` uniform ints in [0, high)."""
    philox, gen = _local_gen()
    _reset(philox, *key)
    return gen.integers(0, high, size=size)


def draw_normal(key: tuple[int, int], size: int, scale: float = 1.0) -> np.ndarray:
    """Atomic keyed draw of a scaled standard-normal vector."""
    philox, gen = _local_gen()
    _reset(philox, *key)
    return scale * gen.standard_normal(size)
