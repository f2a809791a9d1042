"""Binary snapshots and CSV diagnostics.

Snapshot layout::

    HYDRO1\\n
    {json metadata}\\n
    float64 little-endian values, shape (2, nz, ny, nx), C order
"""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .domain import DomainSpec

__all__ = [
    "MAGIC",
    "SnapshotError",
    "SchemaError",
    "SnapshotHeader",
    "write_snapshot",
    "read_snapshot",
    "append_diag",
    "read_diag",
    "write_csv",
]

MAGIC = b"HYDRO1\n"
_DTYPE = np.dtype("<f8")


class SnapshotError(ValueError):
    """Malformed snapshot file."""


class SchemaError(ValueError):
    """CSV row does not match the header written at file creation."""


@dataclass(frozen=True)
class SnapshotHeader:
    spec: DomainSpec
    time: float = 0.0
    dt: float = 0.0
    layout: str = "component,z,y,x"
    endianness: str = "LE"
    scalar_width: int = 8
    extra: dict = field(default_factory=dict)

    @property
    def shape(self) -> tuple:
        return (2,) + self.spec.shape

    def to_json(self) -> str:
        meta = {
            "spec": self.spec.to_dict(),
            "time": self.time,
            "dt": self.dt,
            "layout": self.layout,
            "endianness": self.endianness,
            "scalar_width": self.scalar_width,
            "shape": list(self.shape),
        }
        if self.extra:
            meta["extra"] = self.extra
        return json.dumps(meta, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SnapshotHeader":
        try:
            meta = json.loads(text)
            spec = DomainSpec.from_dict(meta["spec"])
            hdr = cls(spec, float(meta["time"]), float(meta["dt"]), meta["layout"], meta["endianness"],
                      int(meta["scalar_width"]), meta.get("extra", {}))
        except (KeyError, TypeError, ValueError) as exc:
            raise SnapshotError(f"bad snapshot metadata: {exc}") from None
        if tuple(meta.get("shape", hdr.shape)) != hdr.shape:
            raise SnapshotError("metadata shape disagrees with the domain spec")
        if hdr.endianness != "LE" or hdr.scalar_width != 8:
            raise SnapshotError("only little-endian float64 payloads are supported")
        return hdr

    def __eq__(self, other):
        return isinstance(other, SnapshotHeader) and self.to_json() == other.to_json()


def write_snapshot(path, header: SnapshotHeader, values: np.ndarray) -> None:
    """Write grid values of shape (2, nz, ny, nx)."""
    values = np.asarray(values)
    if values.shape != header.shape:
        raise SnapshotError(f"field shape {values.shape} does not match header {header.shape}")
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        fh.write(header.to_json().encode() + b"\n")
        fh.write(np.ascontiguousarray(values, dtype=_DTYPE).tobytes())
    os.replace(tmp, path)


def read_snapshot(path) -> tuple:
    """Return (header, values); raises SnapshotError on any inconsistency."""
    with open(path, "rb") as fh:
        data = fh.read()
    if not data.startswith(MAGIC):
        raise SnapshotError("bad magic: not a HYDRO1 snapshot")
    nl = data.find(b"\n", len(MAGIC))
    if nl < 0:
        raise SnapshotError("missing metadata line")
    header = SnapshotHeader.from_json(data[len(MAGIC):nl].decode())
    payload = data[nl + 1:]
    expected = int(np.prod(header.shape)) * 8
    if len(payload) < expected:
        raise SnapshotError(f"truncated payload: {len(payload)} of {expected} bytes")
    if len(payload) > expected:
        raise SnapshotError(f"payload has {len(payload) - expected} trailing bytes")
    values = np.frombuffer(payload, dtype=_DTYPE).reshape(header.shape).astype(float)
    return header, values


def append_diag(path, row: dict) -> None:
    """Append one row; the first call fixes the column schema."""
    path = Path(path)
    keys = list(row)
    if path.exists() and path.stat().st_size > 0:
        with open(path, newline="") as fh:
            header = next(csv.reader(fh))
        if header != keys:
            raise SchemaError(f"columns {keys} do not match existing schema {header}")
        line = _csv_line([row[k] for k in keys])
    else:
        line = _csv_line(keys) + _csv_line([row[k] for k in keys])
    # a single write of a full line keeps appends atomic for one writer
    with open(path, "a", newline="") as fh:
        fh.write(line)


def _csv_line(items) -> str:
    out = []
    for it in items:
        if isinstance(it, (float, np.floating)):
            out.append(repr(float(it)))
        else:
            out.append(str(it))
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerow(out)
    return buf.getvalue()


def read_diag(path) -> tuple:
    """Return (header, rows as float arrays)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        return [], np.zeros((0, 0))
    return rows[0], np.array([[float(x) for x in r] for r in rows[1:]])


def write_csv(path, header: list, rows: list) -> None:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
