"""CSV / JSON readers and writers for descriptors, embeddings, streams and results."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return repr(x) if math.isfinite(x) else ("nan" if math.isnan(x) else ("inf" if x > 0 else "-inf"))
    if x is None:
        return ""
    if isinstance(x, (np.integer, np.bool_)):
        return str(x.item())
    return str(x)


def _open_for_write(path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return open(path, "w", newline="")


def write_vectors_csv(path, case_ids, labels, vectors, timestamps=None, prefix="v") -> Path:
    """One row per case: ``case_id, timestamp, label, v0, v1, ...``."""
    vectors = np.asarray(vectors, dtype=np.float64)
    n, d = vectors.shape
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["case_id", "timestamp", "label", *[f"{prefix}{j}" for j in range(d)]])
        for i in range(n):
            t = "" if timestamps is None else _fmt(timestamps[i])
            w.writerow([case_ids[i], t, labels[i], *map(repr, vectors[i].tolist())])
    return Path(path)


def read_vectors_csv(path):
    """Inverse of :func:`write_vectors_csv`; returns ``(case_ids, timestamps, labels, vectors)``."""
    with open(path, newline="") as fh:
        r = csv.reader(fh)
        header = next(r)
        if header[:3] != ["case_id", "timestamp", "label"]:
            raise ValueError(f"{path}: unexpected header {header[:3]}")
        ids, ts, labels, rows = [], [], [], []
        for row in r:
            ids.append(row[0])
            ts.append(float(row[1]) if row[1] else math.nan)
            labels.append(row[2])
            rows.append([float(v) for v in row[3:]])
    d = len(header) - 3
    return ids, np.asarray(ts), np.asarray(labels), np.asarray(rows, dtype=np.float64).reshape(len(ids), d)


def write_stream_csv(path, stream) -> Path:
    return write_vectors_csv(path, stream.case_ids, stream.labels, stream.vectors, stream.timestamps, prefix="e")


def write_rows_csv(path, rows, fieldnames=None) -> Path:
    rows = list(rows)
    fieldnames = fieldnames or (list(rows[0]) if rows else [])
    with _open_for_write(path) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fieldnames)
        for row in rows:
            w.writerow([_fmt(row.get(k)) for k in fieldnames])
    return Path(path)


def read_rows_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, (np.integer, np.bool_)):
        return obj.item()
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())
