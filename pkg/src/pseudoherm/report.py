"""Serialization of run reports.

JSON output is deterministic: keys are sorted, floats use ``repr`` and
non-finite values are written as the strings ``"nan"``, ``"inf"``, ``"-inf"``.
CSV tables use 17 significant digits and LF line endings.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path

import numpy as np


def jsonable(obj):
    """Plain JSON-compatible structure with numpy values converted."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    if hasattr(obj, "value") and isinstance(obj.value, str):
        return obj.value
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(report_dict) -> str:
    return json.dumps(jsonable(report_dict), sort_keys=True, indent=2, allow_nan=False) + "\n"


def _cell(v) -> str:
    if isinstance(v, str):
        return v
    return "%.17g" % float(v)


def table_csv(columns: dict) -> str:
    """CSV text for a column-major table; the column order is preserved."""
    names = list(columns)
    data = [np.asarray(columns[n]) if not isinstance(columns[n], list) else columns[n] for n in names]
    rows = len(data[0]) if data else 0
    if any(len(c) != rows for c in data):
        raise ValueError("table columns differ in length")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(names)
    for i in range(rows):
        w.writerow([_cell(c[i]) for c in data])
    return buf.getvalue()


def checks_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["check", "status", "criterion", "value", "tolerance", "criterion_status"])
    for c in report.checks:
        if not c.criteria:
            w.writerow([c.name, c.status, "", "", "", ""])
        for cr in c.criteria:
            tol = cr.get("tolerance", cr.get("bounds"))
            tol_text = ";".join(_cell(t) for t in tol) if isinstance(tol, list) else _cell(tol)
            w.writerow([c.name, c.status, cr["label"], _cell(cr["value"]), tol_text, cr["status"]])
    return buf.getvalue()


def emit_report(report, out_dir=None, fmt: str = "json", timings: bool = True) -> list[Path]:
    """Write the report; returns the paths written.

    With ``out_dir`` of ``None`` the JSON report goes to standard output and
    nothing is written.  CSV output writes ``<name>.<command>.checks.csv``
    plus one ``<name>.<table>.csv`` per tabulated function.
    """
    doc = report.to_dict(timings=timings)
    stem = f"{report.scenario.name}.{report.command}"
    if out_dir is None:
        if fmt != "json":
            raise ValueError("CSV output needs an output directory")
        import sys

        sys.stdout.write(dumps(doc))
        return []
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    if fmt == "json":
        path = out / f"{stem}.json"
        path.write_bytes(dumps(doc).encode("utf-8"))
        written.append(path)
    elif fmt == "csv":
        path = out / f"{stem}.checks.csv"
        path.write_bytes(checks_csv(report).encode("utf-8"))
        written.append(path)
        for name, cols in report.tables.items():
            path = out / f"{report.scenario.name}.{name}.csv"
            path.write_bytes(table_csv(cols).encode("utf-8"))
            written.append(path)
    else:
        raise ValueError(f"unknown format {fmt!r}")
    return written
