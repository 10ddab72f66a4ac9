"""Content-addressed response cache.

Every fetched payload is stored under sha256(key) inside a namespace
directory, so dataset builds replay offline and repeated runs hit the
network at most once per resource. Writes go through a temp file and an
atomic rename, which makes the cache safe for concurrent writers.
"""
from __future__ import annotations

import os
from pathlib import Path

from orgclass.storage import atomic_write_bytes, sha256_hex


class DiskCache:
    def __init__(self, root: str | Path, namespace: str):
        if not namespace or "/" in namespace:
            raise ValueError(f"bad cache namespace: {namespace!r}")
        self.root = Path(root) / namespace
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        digest = sha256_hex(key.encode("utf-8"))
        # Two-level fanout keeps directory listings manageable.
        return self.root / digest[:2] / digest

    def get(self, key: str) -> bytes | None:
        path = self._path(key)
        try:
            return path.read_bytes()
        except FileNotFoundError:
            return None

    def put(self, key: str, data: bytes) -> None:
        path = self._path(key)
        path.parent.mkdir(parents=True, exist_ok=True)
        atomic_write_bytes(path, data)

    def __contains__(self, key: str) -> bool:
        return os.path.exists(self._path(key))
