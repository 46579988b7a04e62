"""Canonical content hashing of resolved experiment inputs."""

from __future__ import annotations

import hashlib
from typing import Any

import numpy as np
import orjson
from pydantic import BaseModel


def _canonical(value: Any) -> Any:
    """Convert values to a JSON-stable representation."""
    if isinstance(value, BaseModel):
        return _canonical(value.model_dump(mode="json"))
    if isinstance(value, dict):
        return {str(k): _canonical(v) for k, v in sorted(value.items(), key=lambda item: str(item[0]))}
    if isinstance(value, (list, tuple)):
        return [_canonical(item) for item in value]
    if isinstance(value, (set, frozenset)):
        return sorted(_canonical(item) for item in value)
    if isinstance(value, np.ndarray):
        return _canonical(value.tolist())
    if isinstance(value, np.generic):
        return value.item()
    return value


def canonical_bytes(*parts: Any) -> bytes:
    """Serialize ``parts`` with sorted keys so equal inputs give equal bytes."""
    return orjson.dumps([_canonical(part) for part in parts], option=orjson.OPT_SORT_KEYS)


def content_hash(*parts: Any) -> str:
    """Git-style blob hash (sha1 over ``blob <len>\\0<bytes>``) of ``parts``."""
    payload = canonical_bytes(*parts)
    header = f"blob {len(payload)}\0".encode()
    return hashlib.sha1(header + payload, usedforsecurity=False).hexdigest()
