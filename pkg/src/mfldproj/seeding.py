"""Hierarchical derivation of 64-bit seeds.

Every stochastic routine in the package takes an explicit integer seed.
Nested computations (per-trial, per-projector, ...) derive child seeds from
a master seed and a path of labels, so that results do not depend on
execution order and adding work never perturbs existing streams.
"""

from __future__ import annotations

import hashlib

__all__ = ["derive_seed"]

_MASK = (1 << 64) - 1


def derive_seed(master: int, path: list | tuple = ()) -> int:
    """Derive a 64-bit seed from ``master`` and a path of labels.

    Labels may be strings or integers.  The empty path returns ``master``
    unchanged.  The chain is a BLAKE2b hash per path element, so sibling
    paths give independent, collision-resistant tokens, and the mapping is
    stable across package and NumPy versions.
    """
    seed = int(master) & _MASK
    for label in path:
        if isinstance(label, (int,)) and not isinstance(label, bool):
            token = b"i" + int(label).to_bytes(16, "little", signed=True)
        elif isinstance(label, str):
            token = b"s" + label.encode("utf-8")
        else:
            raise TypeError(f"path labels must be int or str, got {type(label).__name__}")
        h = hashlib.blake2b(seed.to_bytes(8, "little") + token, digest_size=8)
        seed = int.from_bytes(h.digest(), "little")
    return seed
