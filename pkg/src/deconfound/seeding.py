"""Stable child-seed derivation.

``derive_seed(g, name, i)`` hashes ``(g, name, i)`` with SHA-256 and keeps the
low 63 bits, so seeds do not depend on the numpy version or on the order in
which components are run.
"""

import hashlib


def derive_seed(global_seed: int, component: str, index: int = 0) -> int:
    digest = hashlib.sha256(f"{int(global_seed)}:{component}:{int(index)}".encode()).digest()
    return int.from_bytes(digest[:8], "little") & ((1 << 63) - 1)
