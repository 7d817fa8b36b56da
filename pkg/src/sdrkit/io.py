"""CSV data files, basis files and key=value configuration."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import InvalidInputError
from .linalg import DataSet

BASIS_KEYS = ("d", "p", "method", "basis", "meta")
LOAD_TOL = 1e-8


@dataclass
class BasisFile:
    basis: np.ndarray
    method: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.basis.shape[0]

    @property
    def p(self) -> int:
        return self.basis.shape[1]

    def dumps(self) -> str:
        rows = ",\n    ".join("[" + ", ".join(f"{v:.17g}" for v in row) + "]" for row in self.basis)
        meta = json.dumps({str(k): str(v) for k, v in self.meta.items()}, sort_keys=True)
        return (f'{{\n  "d": {self.d},\n  "p": {self.p},\n  "method": {json.dumps(self.method)},\n'
                f'  "basis": [\n    {rows}\n  ],\n  "meta": {meta}\n}}\n')

    def write(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.dumps())

    @classmethod
    def loads(cls, text: str, source: str = "<string>") -> "BasisFile":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidInputError(f"{source}: not a valid basis file ({exc})") from exc
        if not isinstance(doc, dict) or set(doc) != set(BASIS_KEYS):
            raise InvalidInputError(f"{source}: basis file needs exactly the keys {', '.join(BASIS_KEYS)}")
        try:
            B = np.array(doc["basis"], dtype=float)
            d, p = int(doc["d"]), int(doc["p"])
        except (TypeError, ValueError) as exc:
            raise InvalidInputError(f"{source}: malformed basis entries ({exc})") from exc
        if B.ndim != 2 or B.shape != (d, p) or p < 1:
            raise InvalidInputError(f"{source}: basis shape {B.shape} does not match d={d}, p={p}")
        if not np.all(np.isfinite(B)):
            raise InvalidInputError(f"{source}: basis contains non-finite numbers")
        err = float(np.abs(B.T @ B - np.eye(p)).max())
        if err > LOAD_TOL:
            raise InvalidInputError(f"{source}: basis is not orthonormal (max |U^T U - I| = {err:.3g})")
        meta = doc["meta"] if isinstance(doc["meta"], dict) else {}
        return cls(B, str(doc["method"]), {str(k): str(v) for k, v in meta.items()})

    @classmethod
    def read(cls, path: str) -> "BasisFile":
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise InvalidInputError(f"cannot read basis file {path}: {exc.strerror}") from exc
        return cls.loads(text, path)


def read_csv(path: str, target: str, categorical: bool = False,
             features: Optional[list] = None) -> DataSet:
    """Read a headed CSV; every non-target column is a covariate unless
    ``features`` names a subset."""
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise InvalidInputError(f"cannot read {path}: {exc.strerror}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InvalidInputError(f"{path}: empty file, header required") from None
        except (UnicodeDecodeError, csv.Error) as exc:
            raise InvalidInputError(f"{path}: unreadable header ({exc})") from exc
        header = [h.strip() for h in header]
        if target not in header:
            raise InvalidInputError(f"{path}: target column {target!r} not found in header")
        cols = features if features else [h for h in header if h != target]
        missing = [c for c in cols if c not in header]
        if missing:
            raise InvalidInputError(f"{path}: feature column(s) {', '.join(missing)} not found")
        if not cols:
            raise InvalidInputError(f"{path}: no covariate columns")
        t_idx = header.index(target)
        f_idx = [header.index(c) for c in cols]
        rows, labels = [], []
        try:
            for line_no, row in enumerate(reader, start=2):
                if not row or all(not c.strip() for c in row):
                    continue
                if len(row) != len(header):
                    raise InvalidInputError(
                        f"{path}:{line_no}: expected {len(header)} fields, got {len(row)}")
                try:
                    rows.append([float(row[i]) for i in f_idx])
                except ValueError:
                    bad = next(header[i] for i in f_idx if not _is_float(row[i]))
                    raise InvalidInputError(
                        f"{path}:{line_no}: non-numeric value in column {bad!r}") from None
                cell = row[t_idx].strip()
                if categorical:
                    labels.append(cell)
                else:
                    if not _is_float(cell):
                        raise InvalidInputError(
                            f"{path}:{line_no}: non-numeric target {cell!r} (use --categorical)")
                    labels.append(float(cell))
        except (UnicodeDecodeError, csv.Error) as exc:
            raise InvalidInputError(f"{path}: malformed CSV ({exc})") from exc
    if not rows:
        raise InvalidInputError(f"{path}: no data rows")
    X = np.array(rows, dtype=float).T
    return DataSet(X, np.array(labels, dtype=object if categorical else float),
                   categorical=categorical, feature_names=cols)


def _is_float(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def write_csv(path: str, data: DataSet, target: str = "y") -> None:
    names = list(data.feature_names or [f"x{i + 1}" for i in range(data.d)])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names + [target])
        for j in range(data.n):
            w.writerow([f"{v:.17g}" for v in data.X[:, j]] + [_fmt_label(data.y[j])])


def _fmt_label(v):
    if isinstance(v, (float, np.floating)):
        return f"{v:.17g}"
    return str(v)


def parse_kv(items, source: str = "--param") -> dict:
    out = {}
    for item in items:
        if "=" not in item:
            raise InvalidInputError(f"{source}: expected key=value, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip()
        if not k:
            raise InvalidInputError(f"{source}: empty key in {item!r}")
        out[k] = v.strip()
    return out


def read_config(path: str) -> dict:
    """key=value lines; blank lines and ``#`` comments ignored."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = [ln.split("#", 1)[0].strip() for ln in fh]
    except OSError as exc:
        raise InvalidInputError(f"cannot read config {path}: {exc.strerror}") from exc
    return parse_kv([ln for ln in lines if ln], path)


def coerce(value: str):
    low = value.lower()
    if low in ("true", "false"):
        return low == "true"
    for conv in (int, float):
        try:
            return conv(value)
        except ValueError:
            pass
    return value


__all__ = ["BasisFile", "read_csv", "write_csv", "parse_kv", "read_config", "coerce"]
