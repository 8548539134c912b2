"""Run directories: JSON reports, CSV tables and a hashed manifest.

Files are written atomically and never carry timestamps or host data, so the
same config and seed give byte-identical directories.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import logging
import math
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

MANIFEST = "manifest.json"
ERROR_REPORT = "error.json"
FLOAT_DIGITS = 10


def _clean(value: Any) -> Any:
    """JSON-safe copy: numpy scalars unwrapped, floats rounded, non-finite as strings."""
    if isinstance(value, dict):
        return {str(k): _clean(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_clean(v) for v in value.tolist()]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float):
        if not math.isfinite(value):
            return str(value)
        return float(f"{value:.{FLOAT_DIGITS}g}")
    if isinstance(value, complex):
        return {"re": _clean(value.real), "im": _clean(value.imag)}
    return value


def to_json(data: Any) -> str:
    return json.dumps(_clean(data), sort_keys=True, indent=2, ensure_ascii=False) + "\n"


def to_csv(rows: Iterable[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buffer.getvalue()


def _cell(value: Any) -> Any:
    value = _clean(value)
    if isinstance(value, float):
        return f"{value:.{FLOAT_DIGITS}g}"
    return value


def write_atomic(path: Path, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with tempfile.NamedTemporaryFile(mode="w", dir=str(path.parent), delete=False,
                                     encoding="utf-8", newline="", suffix=".tmp") as tmp:
        tmp.write(text)
        tmp_path = tmp.name
    os.replace(tmp_path, str(path))
    return path


def sha256(path: Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


class RunDirectory:
    """One output directory per invocation; every file is listed in ``manifest.json``."""

    def __init__(self, root: Path, command: str = ""):
        self.root = Path(root)
        self.command = command
        self.files: List[str] = []

    def _record(self, name: str) -> Path:
        if name not in self.files:
            self.files.append(name)
        return self.root / name

    def write_json(self, name: str, data: Any) -> Path:
        path = write_atomic(self._record(name), to_json(data))
        logger.debug("wrote %s", path)
        return path

    def write_csv(self, name: str, rows: Iterable[Sequence[Any]]) -> Path:
        path = write_atomic(self._record(name), to_csv(rows))
        logger.debug("wrote %s", path)
        return path

    def write_text(self, name: str, text: str) -> Path:
        return write_atomic(self._record(name), text)

    def manifest(self) -> Dict[str, Any]:
        entries = []
        for name in sorted(self.files):
            path = self.root / name
            entries.append({"path": name, "sha256": sha256(path), "bytes": path.stat().st_size})
        return {"command": self.command, "artifacts": entries}

    def finalize(self) -> Path:
        path = write_atomic(self.root / MANIFEST, to_json(self.manifest()))
        logger.info("%d artifact(s) in %s", len(self.files), self.root)
        return path

    def write_error(self, report: Dict[str, Any]) -> Optional[Path]:
        try:
            return write_atomic(self.root / ERROR_REPORT, to_json(report))
        except OSError as e:
            logger.error("cannot write %s: %s", ERROR_REPORT, e)
            return None
