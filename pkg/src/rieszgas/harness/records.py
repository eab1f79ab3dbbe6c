"""Experiment records (JSONL, fixed field order) and CSV data tables.

Records never carry wall-clock time so that a rerun with the same config and
seed reproduces ``records.jsonl`` byte for byte; runtimes go to the summary.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

RECORD_FIELDS = ("id", "experiment", "digest", "seed", "params", "lhs", "rhs", "constant", "passed", "kind",
                 "details")


def _clean(x):
    """JSON-safe copy: numpy scalars unwrapped, non-finite floats as strings."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_clean(v) for v in x.tolist()]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        v = float(x)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    return x


@dataclass
class ExperimentRecord:
    """One verification row. ``passed`` is derived by the experiment, never set by hand.

    ``kind`` is ``"check"`` for rows that enter the exit status, ``"data"`` for
    rows that only report measurements and ``"qualitative"`` for checks the
    theory supports only in shape.
    """

    id: str
    experiment: str
    params: dict = field(default_factory=dict)
    lhs: float | None = None
    rhs: float | None = None
    constant: float | None = None
    passed: bool | None = None
    kind: str = "check"
    details: dict = field(default_factory=dict)
    digest: str = ""
    seed: int = 0

    def to_json(self) -> str:
        row = {k: _clean(getattr(self, k)) for k in RECORD_FIELDS}
        return json.dumps(row, separators=(", ", ": "), allow_nan=False)

    @property
    def counts(self) -> bool:
        return self.kind == "check"


def check(id: str, experiment: str, lhs, rhs, params=None, constant=None, details=None, strict: bool = False,
          kind: str = "check") -> ExperimentRecord:
    """Record whose verdict is ``lhs <= rhs`` (``<`` when ``strict``); non-finite sides fail."""
    lhs_f = float(lhs)
    rhs_f = float(rhs)
    ok = math.isfinite(lhs_f) and not math.isnan(rhs_f) and (lhs_f < rhs_f if strict else lhs_f <= rhs_f)
    return ExperimentRecord(id, experiment, dict(params or {}), lhs_f, rhs_f,
                            None if constant is None else float(constant), bool(ok), kind, dict(details or {}))


def flag(id: str, experiment: str, ok: bool, params=None, details=None, lhs=None, rhs=None, constant=None,
         kind: str = "check") -> ExperimentRecord:
    """Record for a boolean property computed by the experiment."""
    return ExperimentRecord(id, experiment, dict(params or {}), None if lhs is None else float(lhs),
                            None if rhs is None else float(rhs), None if constant is None else float(constant),
                            bool(ok), kind, dict(details or {}))


def data(id: str, experiment: str, params=None, lhs=None, details=None) -> ExperimentRecord:
    return ExperimentRecord(id, experiment, dict(params or {}), None if lhs is None else float(lhs),
                            None, None, None, "data", dict(details or {}))


def write_records(path, records: list) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for r in records:
            fh.write(r.to_json())
            fh.write("\n")


def read_records(path) -> list:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                out.append(json.loads(line))
    return out


def _cell(v):
    v = _clean(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, (list, dict)):
        return json.dumps(v, separators=(",", ":"))
    return "" if v is None else v


def write_table(path, header: list, rows: list) -> None:
    """RFC 4180 CSV (CRLF line ends, minimal quoting)."""
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\r\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def ensure_dir(path) -> Path:
    p = Path(path)
    p.mkdir(parents=True, exist_ok=True)
    return p
