"""Keyed random substreams.

Every random draw in the package comes from a generator whose state is a
pure function of ``(master_seed, purpose, *key)``.  Nothing is shared
between streams, so any partition of the work over processes reproduces
the same numbers.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# purpose tags; keep values stable, they are part of the reproducibility contract
SIMULATE = 1
MARGINAL = 2
JITTER = 3
BANDS = 4
OUTCOME_ORACLE = 5

_MASK64 = (1 << 64) - 1


@dataclass(frozen=True)
class SeedSpec:
    """A master seed plus a ``(replicate_index, subject_index)`` stream id."""

    master_seed: int = 0
    stream_id: tuple[int, int] = (0, 0)

    def generator(self, purpose: int = SIMULATE, *extra: int) -> np.random.Generator:
        return substream(self.master_seed, purpose, *self.stream_id, *extra)


def substream(master_seed: int, purpose: int, *key: int) -> np.random.Generator:
    """Philox generator keyed by ``(master_seed, purpose, *key)``."""
    entropy = [int(master_seed) & _MASK64, int(purpose)]
    entropy.extend(int(k) & _MASK64 for k in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def text_key(text: str) -> int:
    """Stable 63-bit integer for a string (model hash, dataset tag, ...)."""
    return int.from_bytes(hashlib.sha256(text.encode()).digest()[:8], "big") >> 1


def derive_seed(master_seed: int, *parts) -> int:
    """Child seed for a named sub-computation, e.g. ``derive_seed(0, "null", key)``."""
    return text_key("/".join([str(int(master_seed))] + [str(p) for p in parts]))
