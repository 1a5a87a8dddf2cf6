"""Small shared helpers: canonical JSON, stable hashing, seed derivation."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path


def stable_json(obj) -> str:
    """Canonical JSON: sorted keys, no whitespace. Used for hashing."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def digest(obj) -> str:
    """Hex digest of an object's canonical JSON form (first 12 hex chars)."""
    return hashlib.sha256(stable_json(obj).encode("utf-8")).hexdigest()[:12]


def sha256_file(path: str | Path) -> str:
    h = hashlib.sha256()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def mix_entropy(*parts) -> list[int]:
    """Derive rng entropy words from arbitrary hashable parts.

    Each part maps to a 64-bit word via sha256, so streams derived from
    different part tuples are independent and platform-stable.
    """
    words = []
    for part in parts:
        if isinstance(part, int) and 0 <= part < 2**63:
            words.append(part)
        else:
            blob = repr(part).encode("utf-8")
            words.append(int.from_bytes(hashlib.sha256(blob).digest()[:8], "little"))
    return words
