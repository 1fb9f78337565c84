"""
Reading and writing run artifacts.

Every writer goes through ``<name>.partial`` and renames on success, so a
file without the suffix is always complete.
"""

import csv
import io
import json
import logging
import os
from pathlib import Path
from typing import Any, Iterable, Union

from .const import PARTIAL_SUFFIX, TRACE_COLUMNS
from .unlearner import TrainTrace

_LOGGER = logging.getLogger(__name__)

PathLike = Union[str, Path]


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, ensure_ascii=False, allow_nan=True) + "\n"


def write_text_atomic(path: PathLike, text: str) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    partial = path.with_name(path.name + PARTIAL_SUFFIX)
    with open(partial, "w", encoding="utf-8", newline="") as f:
        f.write(text)
    os.replace(partial, path)
    _LOGGER.debug(f"Wrote {path}")
    return path


def write_json(obj: Any, path: PathLike) -> Path:
    return write_text_atomic(path, canonical_json(obj))


def read_json(path: PathLike) -> Any:
    with open(path, "r", encoding="utf-8") as f:
        return json.load(f)


def write_jsonl(rows: Iterable[dict], path: PathLike) -> Path:
    lines = [json.dumps(r, sort_keys=True, ensure_ascii=False) + "\n" for r in rows]
    return write_text_atomic(path, "".join(lines))


def read_jsonl(path: PathLike) -> list[dict]:
    with open(path, "r", encoding="utf-8") as f:
        return [json.loads(line) for line in f if line.strip()]


def _csv_text(columns: list[str], rows: Iterable[dict]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({c: row[c] for c in columns})
    return buf.getvalue()


def write_csv(columns: list[str], rows: Iterable[dict], path: PathLike) -> Path:
    return write_text_atomic(path, _csv_text(columns, rows))


def write_trace_csv(trace: TrainTrace, path: PathLike) -> Path:
    """Epoch-0 row first, then one row per completed epoch."""
    return write_csv(TRACE_COLUMNS, (r.as_dict() for r in trace.all_rows()), path)


def read_trace_csv(path: PathLike) -> list[dict]:
    with open(path, "r", encoding="utf-8", newline="") as f:
        rows = list(csv.DictReader(f))
    return [{k: int(v) if k == "epoch" else float(v) for k, v in row.items()} for row in rows]
