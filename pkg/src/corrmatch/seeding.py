"""Deterministic seed derivation.

Every random draw in the toolkit flows from a single 64-bit base seed
through labelled child seeds, so any study, trial, or dataset can be
re-created independently and re-runs are bit-identical.
"""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(base_seed: int, *labels) -> int:
    """Hash (base_seed, label path) into a child seed.

    Labels may be strings or numbers; they are converted with str(), so use
    stable values (ints, short strings) for reproducible pipelines.
    """
    h = hashlib.sha256()
    h.update(str(int(base_seed)).encode("ascii"))
    for label in labels:
        h.update(b"\x1f")
        h.update(str(label).encode("utf-8"))
    return int.from_bytes(h.digest()[:8], "little")


def rng_from(base_seed: int, *labels) -> np.random.Generator:
    """Generator seeded by derive_seed(base_seed, *labels)."""
    return np.random.default_rng(derive_seed(base_seed, *labels))
