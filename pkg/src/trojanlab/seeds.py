"""Seed derivation: one master seed fans out to every stochastic task.

Each consumer gets ``derive_seed(master, label, index)`` where the label
names the task ("trigger", "train", ...). Hashing makes the streams
independent of grid ordering, so adding a cell never shifts another
cell's randomness.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, label: str, index: int = 0) -> int:
    """Stable non-negative 63-bit seed from (master, label, index)."""
    text = f"{master}:{label}:{index}".encode("utf-8")
    digest = hashlib.sha256(text).digest()
    return int.from_bytes(digest[:8], "little") & (2**63 - 1)
