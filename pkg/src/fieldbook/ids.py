"""Opaque identifier generation. Ids are random, never reused, and recorded in
the journal so replay never regenerates them."""

from __future__ import annotations

import secrets

# Tests may monkeypatch this for deterministic fixtures.
_token_hex = secrets.token_hex


def new_id(prefix: str) -> str:
    return prefix + _token_hex(6)


def new_secret_token() -> str:
    # Bearer credentials: 128 bits of entropy minimum.
    return _token_hex(16)
