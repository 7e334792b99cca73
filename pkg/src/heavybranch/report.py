"""Deterministic serialization of verification reports.

Runtime is measured and kept on the in-memory rows, but the files zero the
seconds column by default: report bytes must be reproducible from
(config, seed) alone, and wall-clock timing is not.  Pass ``timed=True`` to
record measured runtimes at the cost of byte-stable output.
"""

from __future__ import annotations

import json
import os

from .verify import VerificationReport

CSV_COLUMNS = ("check_id", "statistic", "estimate", "stderr", "target",
               "tolerance", "pass", "seconds")


def _num(x: float) -> str:
    return "%.12g" % float(x)


def _row_cells(row, timed: bool) -> list[str]:
    return [
        row.check_id,
        row.statistic,
        _num(row.estimate),
        _num(row.stderr),
        _num(row.target),
        _num(row.tolerance),
        "true" if row.passed else "false",
        _num(row.seconds if timed else 0.0),
    ]


def report_to_csv(report: VerificationReport, timed: bool = False) -> str:
    lines = [",".join(CSV_COLUMNS)]
    for row in report.rows:
        lines.append(",".join(_row_cells(row, timed)))
    return "\n".join(lines) + "\n"


def report_to_json(report: VerificationReport, timed: bool = False) -> str:
    payload = []
    for row in report.rows:
        cells = _row_cells(row, timed)
        payload.append({
            "check_id": cells[0],
            "statistic": cells[1],
            "estimate": float(cells[2]),
            "stderr": float(cells[3]),
            "target": float(cells[4]),
            "tolerance": float(cells[5]),
            "pass": bool(row.passed),
            "seconds": float(cells[7]),
        })
    return json.dumps(payload, indent=2) + "\n"


def write_report(report: VerificationReport, out_dir: str, fmt: str = "csv",
                 timed: bool = False, name: str = "report") -> str:
    """Write the report as ``<out_dir>/<name>.<fmt>`` and return the path."""
    if report is None:
        raise ValueError("report must not be None")
    if fmt not in ("csv", "json"):
        raise ValueError(f"format must be csv or json, got {fmt!r}")
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.{fmt}")
    text = report_to_csv(report, timed) if fmt == "csv" else report_to_json(
        report, timed)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    return path


def write_table(out_dir: str, name: str, header: tuple[str, ...], rows) -> str:
    """Plot-ready data table as its own CSV (never embedded in the report)."""
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, f"{name}.csv")
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_num(v) if not isinstance(v, str) else v
                              for v in row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path
