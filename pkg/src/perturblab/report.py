"""CSV and JSON emission for run records.

Every file name carries the config hash.  CSVs are UTF-8 with LF line
endings and shortest round-trip float formatting, so identical runs give
identical bytes.  JSON cannot hold non-finite floats; they are written as
the strings ``"inf"``, ``"-inf"`` and ``"nan"`` and restored by :func:`load_json`.
"""

from __future__ import annotations

import csv
import io
import json
import math
import threading
from pathlib import Path

import numpy as np

from .runner import RunRecord, Table

FORMATS = ("csv", "json", "both")
_NONFINITE = {"inf": math.inf, "-inf": -math.inf, "nan": math.nan}


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def csv_text(table: Table) -> str:
    """Header row then one row per record; an empty table is header-only."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def jsonable(obj):
    """Plain JSON types with non-finite floats as strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, complex):
        return {"re": jsonable(obj.real), "im": jsonable(obj.imag)}
    return obj


def _restore(obj):
    if isinstance(obj, dict):
        return {k: _restore(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_restore(v) for v in obj]
    if isinstance(obj, str) and obj in _NONFINITE:
        return _NONFINITE[obj]
    return obj


def json_text(record: RunRecord) -> str:
    return json.dumps(jsonable(record.to_dict()), indent=1, allow_nan=False) + "\n"


def load_json(path: str | Path) -> dict:
    """Read a report, turning the non-finite markers back into floats."""
    with open(path, encoding="utf-8") as fh:
        return _restore(json.load(fh))


class Writer:
    """Serializes all file output of a run; safe to call from worker threads."""

    def __init__(self, out_dir: str | Path, config_hash: str):
        self.out = Path(out_dir)
        self.hash = config_hash
        self.paths: list[Path] = []
        self._lock = threading.Lock()

    def path(self, stem: str, ext: str) -> Path:
        return self.out / f"{stem}-{self.hash}.{ext}"

    def write_text(self, stem: str, ext: str, text: str) -> Path:
        p = self.path(stem, ext)
        with self._lock:
            self.out.mkdir(parents=True, exist_ok=True)
            with open(p, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
            self.paths.append(p)
        return p

    def write_figure(self, stem: str, fig) -> Path:
        p = self.path(stem, "png")
        with self._lock:
            self.out.mkdir(parents=True, exist_ok=True)
            # no metadata, so identical figures give identical files
            fig.savefig(p, format="png", dpi=100, metadata={"Software": None})
            self.paths.append(p)
        return p


def emit(record: RunRecord, writer: Writer, fmt: str = "both") -> list[Path]:
    """Write one CSV per table and/or the JSON report."""
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    start = len(writer.paths)
    if fmt in ("csv", "both"):
        for stage in record.stages.values():
            for name, table in stage.tables.items():
                writer.write_text(name, "csv", csv_text(table))
    if fmt in ("json", "both"):
        writer.write_text("report", "json", json_text(record))
    return writer.paths[start:]
