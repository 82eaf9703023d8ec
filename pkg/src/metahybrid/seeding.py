"""Deterministic seed fan-out: one master seed yields stable per-stage
(and per-candidate) seeds so stages can rerun independently."""

from __future__ import annotations

import hashlib


def derive_seed(master: int, *names: str) -> int:
    h = hashlib.sha256(("|".join(str(n) for n in names) + f"#{master}").encode())
    return int.from_bytes(h.digest()[:8], "big") % (2**32)
