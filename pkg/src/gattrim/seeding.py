"""Deterministic seed derivation.

A single master seed drives every stage of a run (splits, parameter init,
attention re-init, dropout streams, clustering). Stage seeds are derived by
hashing the master seed together with a path of string/int tags, so adding a
stage never perturbs the streams of existing ones and repetitions are
independent of execution order (safe under parallelism).
"""

import hashlib


def derive_seed(master: int, *path) -> int:
    """Stable 63-bit seed for the stage identified by `path` under `master`."""
    text = repr((int(master),) + tuple(path)).encode("utf-8")
    digest = hashlib.sha256(text).digest()
    return int.from_bytes(digest[:8], "little") >> 1
