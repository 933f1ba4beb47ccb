"""Result records and their bit-stable serializations.

A :class:`ResultRecord` holds the effective configuration, the payload of one
operation and its diagnostics. It round-trips through JSON losslessly (Python
writes the shortest repr that reads back to the same double). CSV output
writes 17 significant digits, LF line endings and a fixed row order, so two
runs of the same configuration produce identical bytes.

CSV layout: two ``#`` comment lines (schema tag, then compact provenance
JSON), one column-header line, then one line per row.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

SCHEMA_VERSION = 1
TRAJECTORY_COLUMNS = ("t", "concurrence", "discarded_weight", "max_bond")
SWEEP_COLUMNS = ("axis_value", "c_max", "t_max", "boundary_flag")
KINDS = ("trajectory", "sweep")


def schema_tag(kind: str) -> str:
    return f"xxzquench.{kind}.v{SCHEMA_VERSION}"


def _plain(value):
    """Convert numpy scalars and arrays to JSON-native types."""
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, np.ndarray):
        return [_plain(v) for v in value.tolist()]
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    return value


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return format(x, ".17g")


@dataclass
class ResultRecord:
    """``kind`` is one of ``ground``, ``trajectory``, ``sweep``, ``validate``, ``xi``."""

    kind: str
    config: dict
    data: dict
    diagnostics: dict = field(default_factory=dict)
    schema: str = ""

    def __post_init__(self):
        if not self.schema:
            self.schema = schema_tag(self.kind)

    def to_json(self) -> str:
        payload = {
            "schema": self.schema,
            "kind": self.kind,
            "config": _plain(self.config),
            "data": _plain(self.data),
            "diagnostics": _plain(self.diagnostics),
        }
        return json.dumps(payload, indent=1, sort_keys=True, allow_nan=True) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "ResultRecord":
        p = json.loads(text)
        return cls(p["kind"], p["config"], p["data"], p.get("diagnostics", {}), p["schema"])

    def __eq__(self, other):
        return isinstance(other, ResultRecord) and self.to_json() == other.to_json()


def trajectory_record(traj, config: dict) -> ResultRecord:
    from .protocol import find_peak

    peak = find_peak(traj)
    data = {
        "t": traj.times,
        "concurrence": traj.concurrence,
        "discarded_weight": traj.discarded_weight,
        "max_bond": traj.max_bond,
        "peak": {"c_max": peak.c_max, "t_max": peak.t_max, "attained_at_boundary": peak.attained_at_boundary},
    }
    diag = {"engine": traj.engine, "warnings": list(traj.warnings), "extras": traj.extras,
            "provenance": traj.provenance}
    return ResultRecord("trajectory", config, data, diag)


def sweep_record(result, config: dict) -> ResultRecord:
    data = {
        "axis": result.axis,
        "axis_value": list(result.values),
        "c_max": [s.c_max if s else float("nan") for s in result.summaries],
        "t_max": [s.t_max if s else float("nan") for s in result.summaries],
        "boundary_flag": [bool(s.attained_at_boundary) if s else False for s in result.summaries],
        "extras": result.extras,
    }
    diag = {"failures": {str(k): v for k, v in result.failures.items()}, "provenance": result.provenance}
    return ResultRecord("sweep", config, data, diag)


def _rows(record: ResultRecord, kind: str):
    d = record.data
    if kind == "trajectory":
        for t, c, w, b in zip(d["t"], d["concurrence"], d["discarded_weight"], d["max_bond"]):
            yield [format_float(t), format_float(c), format_float(w), str(int(b))]
    else:
        for v, c, t, f in zip(d["axis_value"], d["c_max"], d["t_max"], d["boundary_flag"]):
            axis = str(int(v)) if record.data.get("axis") == "N" else format_float(v)
            yield [axis, format_float(c), format_float(t), "1" if f else "0"]


def csv_text(record: ResultRecord, kind: str | None = None) -> str:
    kind = kind or record.kind
    if kind not in KINDS:
        raise ValueError(f"CSV kind must be one of {KINDS}, got {kind!r}")
    if record.kind != kind:
        raise ValueError(f"cannot write a {record.kind} record as {kind}")
    columns = TRAJECTORY_COLUMNS if kind == "trajectory" else SWEEP_COLUMNS
    provenance = {"config": _plain(record.config), "diagnostics": _plain(record.diagnostics)}
    if kind == "sweep":
        provenance["axis"] = record.data.get("axis")
    buf = io.StringIO(newline="")
    buf.write(f"# {schema_tag(kind)}\n")
    buf.write("# provenance " + json.dumps(provenance, sort_keys=True, separators=(",", ":")) + "\n")
    buf.write(",".join(columns) + "\n")
    for row in _rows(record, kind):
        buf.write(",".join(row) + "\n")
    return buf.getvalue()


def emit_csv(record: ResultRecord, kind: str | None = None, path=None) -> str:
    """Write the CSV to ``path`` (if given) and return its text."""
    text = csv_text(record, kind)
    if path is not None:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return text


def read_csv(text: str):
    """Parse emitted CSV into ``(schema, provenance, columns, rows)``.

    Trailing ``#`` lines (summaries printed by the CLI) are skipped.
    """
    lines = text.split("\n")
    schema = lines[0][2:]
    provenance = json.loads(lines[1][len("# provenance "):])
    columns = lines[2].split(",")
    rows = [line.split(",") for line in lines[3:] if line and not line.startswith("#")]
    return schema, provenance, columns, rows


def write_record(record: ResultRecord, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(record.to_json())


__all__ = [
    "ResultRecord",
    "csv_text",
    "emit_csv",
    "read_csv",
    "schema_tag",
    "sweep_record",
    "trajectory_record",
    "write_record",
]
