"""
Report writers: evaluation tables, JSON-lines records and PR-curve CSV
"""

import csv
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence

from pydantic import BaseModel

from ovid.core.evaluation import ConfusionCounts, Metrics, PrCurve

logger = logging.getLogger(__name__)

REPORT_TABLE = "report.txt"
REPORT_RECORDS = "report.jsonl"
PR_CURVE_FILE = "pr_curve.csv"


class EvalRow(BaseModel):
    system: str
    split: str
    examples: int
    counts: ConfusionCounts
    metrics: Metrics
    note: Optional[str] = None


class EvalReport(BaseModel):
    rows: List[EvalRow]

    def table(self) -> str:
        header = f"{'system':<24} {'split':<10} {'n':>6} {'precision':>9} {'recall':>7} {'f1':>7} {'accuracy':>8}"
        lines = [header, "-" * len(header)]
        for row in self.rows:
            m = row.metrics
            lines.append(
                f"{row.system:<24} {row.split:<10} {row.examples:>6} "
                f"{m.precision:>9.4f} {m.recall:>7.4f} {m.f1:>7.4f} {m.accuracy:>8.4f}"
            )
        notes = [f"* {row.system}: {row.note}" for row in self.rows if row.note]
        return "\n".join(lines + ([""] + notes if notes else [])) + "\n"


def write_eval_report(out_dir: str | Path, report: EvalReport) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / REPORT_TABLE).write_text(report.table(), encoding="utf-8")
    with open(out_dir / REPORT_RECORDS, "w", encoding="utf-8") as f:
        for row in report.rows:
            f.write(json.dumps(row.model_dump(mode="json"), sort_keys=True) + "\n")
    logger.info(f"Wrote evaluation report with {len(report.rows)} rows", extra={"path": str(out_dir)})


def write_pr_curve(path: str | Path, curve: PrCurve) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(["threshold", "precision", "recall"])
        for point in curve.points:
            writer.writerow([repr(point.threshold), repr(point.precision), repr(point.recall)])
    logger.info(f"Wrote PR curve with {len(curve.points)} points", extra={"path": str(path)})


def write_records(path: str | Path, records: Sequence[BaseModel]) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as f:
        for record in records:
            f.write(json.dumps(record.model_dump(mode="json"), sort_keys=True) + "\n")
