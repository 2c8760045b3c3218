"""CSV / JSON / TOML readers and writers."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import sys
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .graph import Dag
from .scm import Dataset

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


def _fmt(v: float) -> str:
    # repr round-trips exactly
    return repr(float(v))


def write_matrix_csv(path, A, header: Sequence[str]) -> Path:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[1] != len(header):
        raise ValueError("header length must match the number of columns")
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in A:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    return path


def read_matrix_csv(path) -> tuple[np.ndarray, list[str]]:
    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    try:
        A = np.array([[float(v) for v in r] for r in body], dtype=float)
    except ValueError as exc:
        raise ValueError(f"{path}: non-numeric entry ({exc})") from exc
    if A.size == 0:
        A = A.reshape(0, len(header))
    if A.shape[1] != len(header):
        raise ValueError(f"{path}: ragged rows")
    return A, header


def column_names(prefix: str, n: int) -> list[str]:
    return [f"{prefix}{i + 1}" for i in range(n)]


def save_dataset_csv(dataset: Dataset, directory) -> list[Path]:
    """``X.csv`` plus ``H.csv`` and ``S_true.csv`` when present."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    out = [write_matrix_csv(d / "X.csv", dataset.X, column_names("x", dataset.p))]
    if dataset.H is not None and dataset.H.shape[1]:
        out.append(write_matrix_csv(d / "H.csv", dataset.H, column_names("h", dataset.H.shape[1])))
    if dataset.S_true is not None:
        out.append(write_matrix_csv(d / "S_true.csv", dataset.S_true, column_names("s", dataset.p)))
    return out


def load_dataset_csv(path, H_path=None, S_path=None) -> Dataset:
    """Load ``X`` from a CSV file, or from ``X.csv`` (plus companions) in a directory."""
    path = Path(path)
    if path.is_dir():
        H_path = H_path or (path / "H.csv" if (path / "H.csv").exists() else None)
        S_path = S_path or (path / "S_true.csv" if (path / "S_true.csv").exists() else None)
        path = path / "X.csv"
    X, _ = read_matrix_csv(path)
    H = read_matrix_csv(H_path)[0] if H_path else None
    S = read_matrix_csv(S_path)[0] if S_path else None
    return Dataset(X, H, S)


def _nan_to_none(A: Optional[np.ndarray]):
    if A is None:
        return None
    return [[None if math.isnan(v) else float(v) for v in row] for row in np.asarray(A).tolist()]


def _none_to_nan(rows):
    if rows is None:
        return None
    return np.array([[np.nan if v is None else v for v in row] for row in rows], dtype=float)


def dataset_to_json(dataset: Dataset, dag: Optional[Dag] = None) -> str:
    obj = {
        "X": _nan_to_none(dataset.X),
        "H": _nan_to_none(dataset.H),
        "S_true": _nan_to_none(dataset.S_true),
        "meta": dataset.meta,
    }
    if dag is not None:
        obj["dag"] = json.loads(dag.to_json())
    return json.dumps(obj, sort_keys=True)


def dataset_from_json(text: str) -> Dataset:
    obj = json.loads(text)
    X = np.array(obj["X"], dtype=float)
    return Dataset(X, _none_to_nan(obj.get("H")), _none_to_nan(obj.get("S_true")), obj.get("meta") or {})


def load_config(path) -> dict:
    """TOML (``.toml``) or JSON (anything else)."""
    path = Path(path)
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        return tomllib.loads(text)
    return json.loads(text)


def write_json(path, obj) -> Path:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def file_digest(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()
