"""Plain-text reports: a metrics table, a round curve and a JSON summary."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

from ..gridworld import compute_metrics
from .runner import RunRecord

METRICS_FILE = "metrics.tsv"
CURVE_FILE = "curve.tsv"
SUMMARY_FILE = "run_summary.json"

COLUMNS = ("SR", "SPL", "Mean Traj.", "Score")


class ReportError(ValueError):
    pass


def _fmt(value: float | None) -> str:
    return "-" if value is None else f"{value:.4f}"


def _row_label(rec: RunRecord) -> str:
    mode = f"transfer-{rec.mode.value}" if rec.transfer else rec.mode.value
    return f"{rec.suite_id}\t{mode}\t{rec.round_index}"


def metrics_table(records: Sequence[RunRecord]) -> str:
    lines = ["suite\tmode\tround\t" + "\t".join(COLUMNS)]
    for rec in records:
        m = compute_metrics(rec.records)
        values = (m.sr, m.spl, m.mean_traj, m.answer_score)
        lines.append(_row_label(rec) + "\t" + "\t".join(_fmt(v) for v in values))
    return "\n".join(lines) + "\n"


def curve_table(records: Sequence[RunRecord]) -> str:
    """One row per (mode, round), ordered for plotting round-wise curves."""
    lines = ["mode\tround\tSR\tSPL\tMean Traj."]
    keyed = sorted(records, key=lambda r: (r.suite_id, r.transfer, r.mode.value, r.round_index))
    for rec in keyed:
        m = compute_metrics(rec.records)
        label = f"transfer-{rec.mode.value}" if rec.transfer else rec.mode.value
        lines.append(f"{label}\t{rec.round_index}\t{_fmt(m.sr)}\t{_fmt(m.spl)}\t{_fmt(m.mean_traj)}")
    return "\n".join(lines) + "\n"


def summary(records: Sequence[RunRecord]) -> dict:
    return {
        "version": 1,
        "runs": [
            {
                "suite_id": rec.suite_id,
                "mode": rec.mode.value,
                "round": rec.round_index,
                "transfer": rec.transfer,
                "config": rec.config.to_dict(),
                "metrics": compute_metrics(rec.records).to_dict(),
                "n_errors": len(rec.errors),
            }
            for rec in records
        ],
    }


def write_report(records: Sequence[RunRecord], directory: str | Path) -> list[Path]:
    """Write the three report files; metrics are recomputed from episode outcomes."""
    if not records:
        raise ReportError("no run records to report")
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    files = {
        METRICS_FILE: metrics_table(records),
        CURVE_FILE: curve_table(records),
        SUMMARY_FILE: json.dumps(summary(records), indent=1, sort_keys=True) + "\n",
    }
    paths = []
    for name, text in files.items():
        path = root / name
        path.write_text(text)
        paths.append(path)
    return paths
