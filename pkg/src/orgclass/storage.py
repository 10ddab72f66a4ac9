"""Shared file plumbing: atomic writes, JSONL, hashing, run manifests.

Every artifact the pipeline emits goes through the atomic writers here, so
an interrupted run never leaves a truncated file behind.
"""
from __future__ import annotations

import hashlib
import json
import os
import tempfile
import time
from pathlib import Path
from typing import Any, Iterable


def canonical_json(obj: Any) -> str:
    """Serialize with sorted keys and fixed separators so equal objects
    always produce identical bytes."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def sha256_hex(data: bytes | str) -> str:
    if isinstance(data, str):
        data = data.encode("utf-8")
    return hashlib.sha256(data).hexdigest()


def file_sha256(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def atomic_write_bytes(path: str | Path, data: bytes) -> None:
    """Write via a temp file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | Path, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | Path, obj: Any, indent: int = 2) -> None:
    atomic_write_text(path, json.dumps(obj, indent=indent, sort_keys=True, ensure_ascii=False) + "\n")


def read_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def write_jsonl(path: str | Path, rows: Iterable[dict]) -> int:
    """Write one JSON object per line, atomically. Returns the row count."""
    lines = [canonical_json(row) for row in rows]
    atomic_write_text(path, "".join(line + "\n" for line in lines))
    return len(lines)


def read_jsonl(path: str | Path) -> list[dict]:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                rows.append(json.loads(line))
    return rows


def write_run_manifest(
    out_dir: str | Path,
    stage: str,
    config_hash: str,
    inputs: dict[str, str | Path],
    seed: int | None,
    started: float,
    extra: dict | None = None,
) -> Path:
    """Record what a pipeline stage ran with: config hash, input file hashes,
    seed, and wall-clock timestamps."""
    manifest = {
        "stage": stage,
        "config_hash": config_hash,
        "inputs": {
            name: (file_sha256(p) if Path(p).exists() else None) for name, p in inputs.items()
        },
        "seed": seed,
        "started_at": started,
        "finished_at": time.time(),
    }
    if extra:
        manifest.update(extra)
    path = Path(out_dir) / "run.json"
    write_json(path, manifest)
    return path
