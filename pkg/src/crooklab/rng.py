"""Splittable, counter-style seeding.

Every random quantity in the lab is a pure function of a master seed and a
tuple of labels, so trials can run in any order (or in other processes) and
still reproduce bit-for-bit.
"""

from __future__ import annotations

import hashlib
import random

MASK64 = (1 << 64) - 1


def _encode(labels: tuple) -> bytes:
    return repr(tuple(labels)).encode("utf-8")


def derive_seed(seed: int, *labels) -> int:
    """Return a 64-bit child seed of `seed` for the given label path."""
    h = hashlib.blake2b(digest_size=8, person=b"crooklab-seed")
    h.update((seed & MASK64).to_bytes(8, "little"))
    h.update(_encode(labels))
    return int.from_bytes(h.digest(), "little")


def derive_key(seed: int, *labels) -> bytes:
    """Return a 32-byte hashing key for the given label path."""
    h = hashlib.blake2b(digest_size=32, person=b"crooklab-key")
    h.update((seed & MASK64).to_bytes(8, "little"))
    h.update(_encode(labels))
    return h.digest()


def stream(seed: int, *labels) -> random.Random:
    """A sequential stream (stdlib Mersenne Twister) keyed by the label path."""
    return random.Random(derive_seed(seed, *labels))


def trial_seed(master_seed: int, trial_index: int) -> int:
    return derive_seed(master_seed, "trial", trial_index)
