"""Seed derivation so every random stream regenerates independently."""

import hashlib

import numpy as np


def derive_seed(master_seed: int, tag: str, index: int = 0) -> int:
    """Stable 64-bit seed from (master seed, purpose tag, index)."""
    payload = f"{int(master_seed)}:{tag}:{int(index)}".encode("utf-8")
    digest = hashlib.blake2b(payload, digest_size=8).digest()
    return int.from_bytes(digest, "little")


def derive_rng(master_seed: int, tag: str, index: int = 0) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, tag, index)))
