"""Canonical JSON serialization: sorted keys, UTF-8, compact separators.

Byte-stable output is what makes golden-file tests, manifest hashes, and
round-trip identity checks meaningful, so every file this package writes
goes through canonical_dumps.
"""

from __future__ import annotations

import hashlib
import json
from typing import Any


def canonical_dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()
