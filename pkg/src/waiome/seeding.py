"""Deterministic RNG fan-out.

Every random stream is ``SeedSequence(seed, spawn_key=(task_id, *indices))``
where ``task_id`` is the first 8 bytes of sha256(task name). One top-level
seed therefore reproduces any sub-task independently of execution order.
"""
from __future__ import annotations

import hashlib

import numpy as np


def task_id(name):
    return int.from_bytes(hashlib.sha256(name.encode()).digest()[:8], "little")


def seed_sequence(seed, name, *indices):
    return np.random.SeedSequence(int(seed), spawn_key=(task_id(name), *(int(i) for i in indices)))


def rng(seed, name, *indices):
    return np.random.default_rng(seed_sequence(seed, name, *indices))


def child_seed(seed, name, *indices):
    """A plain 63-bit integer seed for a sub-task (storable in JSON)."""
    return int(seed_sequence(seed, name, *indices).generate_state(2, np.uint32).view(np.uint64)[0] >> np.uint64(1))
