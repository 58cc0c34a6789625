"""Deterministic random-stream derivation.

Every random draw in the package comes from a generator derived from a
master seed plus a key path (e.g. ``("hmm", step, label_index)``), so runs
are reproducible and independent consumers never share a stream.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "seed_path_repr"]


def _key_part_to_int(part: int | str) -> int:
    if isinstance(part, (int, np.integer)):
        value = int(part)
        if value < 0:
            raise ValueError(f"stream key parts must be non-negative, got {value}")
        return value
    if isinstance(part, str):
        # stable across processes, unlike hash()
        return int.from_bytes(part.encode("utf-8"), "little")
    raise TypeError(f"stream key parts must be int or str, got {type(part).__name__}")


def substream(master_seed: int, *path: int | str) -> np.random.Generator:
    """Derive an independent generator for (master_seed, *path)."""
    entropy = [_key_part_to_int(master_seed)] + [_key_part_to_int(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def seed_path_repr(master_seed: int, *path: int | str) -> str:
    """Human-readable stream identifier recorded in run manifests."""
    return "/".join(str(p) for p in (master_seed, *path))
