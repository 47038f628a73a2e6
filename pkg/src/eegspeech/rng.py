"""Seed plumbing: every random decision flows from one run seed through
named sub-streams, so individual stages are reproducible in isolation."""

import hashlib

import numpy as np


def child_seed(seed: int, *names) -> int:
    """Derive a 64-bit seed for a named sub-stream of ``seed``."""
    h = hashlib.sha256()
    h.update(str(int(seed)).encode())
    for name in names:
        h.update(b"/")
        h.update(str(name).encode())
    return int.from_bytes(h.digest()[:8], "little")


def stream(seed: int, *names) -> np.random.Generator:
    """A fresh generator for the sub-stream identified by ``names``."""
    return np.random.default_rng(np.random.SeedSequence(child_seed(seed, *names)))
