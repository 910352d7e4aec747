"""Report serialization: curve.csv, batches.csv, report.json, aggregates.

Floats are written with shortest-round-trip repr so identical runs produce
byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import asdict
from pathlib import Path

from .engine import RunReport, aggregate_runs

CURVE_CSV = "curve.csv"
BATCHES_CSV = "batches.csv"
REPORT_JSON = "report.json"


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def curve_csv_text(report: RunReport) -> str:
    lines = ["cycle,labeled_count,test_accuracy,seed,strategy,model_kind"]
    for point in report.curve:
        lines.append(
            ",".join(
                [
                    _fmt(point["cycle"]),
                    _fmt(point["labeled_count"]),
                    _fmt(point["test_accuracy"]),
                    _fmt(report.seed),
                    report.config["strategy"],
                    report.config["model_kind"],
                ]
            )
        )
    return "\n".join(lines) + "\n"


def batches_csv_text(report: RunReport) -> str:
    """Cycle 0 rows carry the whole-pool baseline mix."""
    lines = ["cycle,class_name,fraction"]
    for name in report.class_names:
        frac = report.pool_composition["fractions"].get(name, 0.0)
        lines.append(f"0,{name},{_fmt(float(frac))}")
    for batch in report.batches:
        for name in report.class_names:
            lines.append(f"{batch['cycle']},{name},{_fmt(float(batch['fractions'][name]))}")
    return "\n".join(lines) + "\n"


def report_json_text(report: RunReport) -> str:
    return json.dumps(asdict(report), indent=1) + "\n"


def write_report(report: RunReport, out_dir: Path | str) -> dict[str, Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        CURVE_CSV: out_dir / CURVE_CSV,
        BATCHES_CSV: out_dir / BATCHES_CSV,
        REPORT_JSON: out_dir / REPORT_JSON,
    }
    paths[CURVE_CSV].write_text(curve_csv_text(report), encoding="utf-8")
    paths[BATCHES_CSV].write_text(batches_csv_text(report), encoding="utf-8")
    paths[REPORT_JSON].write_text(report_json_text(report), encoding="utf-8")
    return paths


def load_report(path: Path | str) -> RunReport:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    return RunReport(**raw)


def aggregate_csv_text(reports: list[RunReport]) -> str:
    rows = aggregate_runs(reports)
    lines = ["cycle,labeled_count,mean_accuracy,std_accuracy,n_runs"]
    for row in rows:
        lines.append(
            ",".join(
                [
                    _fmt(row["cycle"]),
                    _fmt(row["labeled_count"]),
                    _fmt(row["mean_accuracy"]),
                    _fmt(row["std_accuracy"]),
                    _fmt(row["n_runs"]),
                ]
            )
        )
    return "\n".join(lines) + "\n"
