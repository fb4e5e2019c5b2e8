"""CSV/JSON emission for study reports."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

from hpdg.harness import StudyReport

CSV_COLUMNS = ("param", "dg_error", "l2_error", "volume_part", "jump_part", "inflow_part",
               "outflow_part", "eoc_or_slope")


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    # repr round-trips floats exactly
    return repr(float(value))


def report_rows(report: StudyReport) -> list[dict[str, str]]:
    """One dict per row; the norm parts are the squared contributions."""
    out = []
    for r in report.rows:
        out.append({
            "param": _fmt(r.param),
            "dg_error": _fmt(r.dg_error),
            "l2_error": _fmt(r.l2_error),
            "volume_part": _fmt(r.parts.volume),
            "jump_part": _fmt(r.parts.jump),
            "inflow_part": _fmt(r.parts.inflow),
            "outflow_part": _fmt(r.parts.outflow),
            "eoc_or_slope": _fmt(r.rate),
        })
    return out


def write_csv(report: StudyReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=CSV_COLUMNS)
        writer.writeheader()
        writer.writerows(report_rows(report))
    return path


def _jsonable(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(report: StudyReport, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(report.summary()), indent=2, default=float), encoding="utf-8")
    return path


def write_report(report: StudyReport, out) -> tuple[Path, Path]:
    """Write ``<stem>.csv`` and ``<stem>.json``; ``out`` may name either or a directory."""
    out = Path(out)
    if out.suffix in (".csv", ".json"):
        stem = out.with_suffix("")
    elif out.is_dir() or not out.suffix:
        stem = out / f"{report.config.refine}_study_{report.config.field}_{report.config.dim}d"
    else:
        stem = out
    return write_csv(report, stem.with_suffix(".csv")), write_json(report, stem.with_suffix(".json"))


def read_csv(path) -> list[dict[str, str]]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
