"""Small shared helpers: canonical hashing and float formatting."""

from __future__ import annotations

import hashlib
import json


def _canonical(obj):
    """Recursively rewrite floats to their exact hex form for stable hashing."""
    if isinstance(obj, float):
        return float.hex(obj)
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def content_hash(obj) -> str:
    """sha256 of the canonical JSON encoding of ``obj`` (floats bit-exact)."""
    payload = json.dumps(_canonical(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode()).hexdigest()


def sig12(x: float) -> float:
    """Round to 12 significant digits (stable JSON/golden-file serialization)."""
    return float(f"{x:.12g}")
