"""Canonical JSON, config hashing and atomic file output.

Canonical form: sorted keys, no whitespace, shortest-round-trip floats and
no NaN/Inf.  Two payloads are byte-identical iff they are equal, which is
what the determinism contract compares; timestamps live in a separate
runtime block that never enters the canonical form.
"""

from __future__ import annotations

import hashlib
import json
import os
import tempfile


def canonical_json(payload) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config) -> str:
    return hashlib.sha256(canonical_json(config).encode("utf-8")).hexdigest()


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename."""
    directory = os.path.dirname(os.path.abspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
