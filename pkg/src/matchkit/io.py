"""CSV ingestion and JSON emission.

CSV formats (UTF-8, comma separators, '.' decimal):
  points: header "x1,...,xd", one row per point
  causal: header "x1,...,xd,d,y" with d in {0,1}

JSON numbers are emitted with 17 significant digits so that a parse of the
output reproduces every double bit-for-bit, regardless of which component
(CLI, service, or a remote client) produced it.
"""

from __future__ import annotations

import hashlib
import math

import numpy as np

from .data import CausalDataset, PointSet
from .errors import BadTreatmentValue, EmptySample, MalformedInput


def _read_rows(path: str) -> list[list[str]]:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise MalformedInput(f"cannot read {path}: {exc}") from exc
    return [line.split(",") for line in lines if line != ""]


def _parse_float(token: str, row: int, path: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise MalformedInput(
            f"{path}: row {row}: {token!r} is not a number"
        ) from None
    if not math.isfinite(value):
        raise MalformedInput(f"{path}: row {row}: non-finite value {token!r}")
    return value


def read_points_csv(path: str) -> PointSet:
    """Parse a points CSV; rejects wrong arity and non-numeric fields."""
    rows = _read_rows(path)
    if not rows:
        raise MalformedInput(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    d = len(header)
    if header != [f"x{i + 1}" for i in range(d)]:
        raise MalformedInput(
            f"{path}: header must be x1,...,xd, got {','.join(header)!r}"
        )
    data = rows[1:]
    if not data:
        raise EmptySample(f"{path}: no data rows")
    out = np.empty((len(data), d))
    for i, row in enumerate(data):
        if len(row) != d:
            raise MalformedInput(
                f"{path}: row {i + 2}: expected {d} fields, got {len(row)}"
            )
        for j, token in enumerate(row):
            out[i, j] = _parse_float(token, i + 2, path)
    return PointSet(out)


def read_causal_csv(path: str) -> CausalDataset:
    """Parse a causal CSV with covariates, a binary treatment, and an outcome."""
    rows = _read_rows(path)
    if not rows:
        raise MalformedInput(f"{path}: missing header row")
    header = [h.strip() for h in rows[0]]
    if len(header) < 3 or header[-2:] != ["d", "y"]:
        raise MalformedInput(
            f"{path}: header must be x1,...,xd,d,y, got {','.join(header)!r}"
        )
    d = len(header) - 2
    if header[:d] != [f"x{i + 1}" for i in range(d)]:
        raise MalformedInput(
            f"{path}: header must be x1,...,xd,d,y, got {','.join(header)!r}"
        )
    data = rows[1:]
    if not data:
        raise EmptySample(f"{path}: no data rows")
    x = np.empty((len(data), d))
    treat = np.empty(len(data), dtype=np.int64)
    y = np.empty(len(data))
    for i, row in enumerate(data):
        if len(row) != d + 2:
            raise MalformedInput(
                f"{path}: row {i + 2}: expected {d + 2} fields, got {len(row)}"
            )
        for j in range(d):
            x[i, j] = _parse_float(row[j], i + 2, path)
        t_token = row[d].strip()
        if t_token not in ("0", "1"):
            raise BadTreatmentValue(
                f"{path}: row {i + 2}: treatment must be 0 or 1, got {t_token!r}"
            )
        treat[i] = int(t_token)
        y[i] = _parse_float(row[d + 1], i + 2, path)
    return CausalDataset(covariates=PointSet(x), treatments=treat, outcomes=y)


def write_points_csv(path: str, points: PointSet) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"x{i + 1}" for i in range(points.d)) + "\n")
        for row in points.points:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")


def write_causal_csv(path: str, ds: CausalDataset) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(",".join(f"x{i + 1}" for i in range(ds.d)) + ",d,y\n")
        for row, t, y in zip(ds.covariates.points, ds.treatments, ds.outcomes):
            fields = [format(v, ".17g") for v in row]
            fields.append(str(int(t)))
            fields.append(format(y, ".17g"))
            fh.write(",".join(fields) + "\n")


# ---------------------------------------------------------------------------
# JSON emission
# ---------------------------------------------------------------------------

def _format_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    return format(x, ".17g")


def _escape(s: str) -> str:
    out = ['"']
    for ch in s:
        if ch == '"':
            out.append('\\"')
        elif ch == "\\":
            out.append("\\\\")
        elif ch == "\n":
            out.append("\\n")
        elif ch == "\r":
            out.append("\\r")
        elif ch == "\t":
            out.append("\\t")
        elif ord(ch) < 0x20:
            out.append(f"\\u{ord(ch):04x}")
        else:
            out.append(ch)
    out.append('"')
    return "".join(out)


def dumps(obj) -> str:
    """Serialize to JSON with deterministic 17-significant-digit floats."""
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        return _escape(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _format_float(float(obj))
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, dict):
        parts = []
        for key, value in obj.items():
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be strings, got {key!r}")
            parts.append(_escape(key) + ":" + dumps(value))
        return "{" + ",".join(parts) + "}"
    raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def sha256_file(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()
