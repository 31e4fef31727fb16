"""Deterministic random substreams derived from one master seed."""

import hashlib

import numpy as np

BIT_GENERATOR = "PCG64"


def substream(seed, name, chunk=0):
    """Generator keyed by hashing (seed, name, chunk).

    The same triple always yields the same stream, independent of how many
    workers run or in which order chunks are scheduled.
    """
    digest = hashlib.blake2b(f"{int(seed)}|{name}|{int(chunk)}".encode(), digest_size=16).digest()
    entropy = int.from_bytes(digest, "little")
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))
