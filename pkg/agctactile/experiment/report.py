"""Comparison of every architecture that has an evaluation report."""

from __future__ import annotations

from typing import Any
from dataclasses import dataclass
from pathlib import Path
import logging

import pandas as pd

from agctactile.constants import COMPARISON_FILE, REPORT_FILE, SUMMARY_FILE
from agctactile.experiment.metrics import MetricsReport, most_confused_pair
from agctactile.experiment.reference import REFERENCE_METRICS, REFERENCE_PARAMETER_COUNTS, load_baseline
from agctactile.types import Arch, BorrmannClass
from agctactile.utils import read_json, render_table, write_json

logger = logging.getLogger(__name__)

_METRIC_HEADERS = ("A", "P", "Re", "F1", "AUC")


@dataclass(frozen=True, slots=True)
class Comparison:
    table: pd.DataFrame
    text: str
    summary: dict[str, Any]


def _pair_name(pair: tuple[int, int]) -> str:
    return "↔".join(BorrmannClass.from_label(label).value for label in pair)


def _learning_signal(rows: list[dict[str, Any]]) -> dict[str, Any]:
    baseline = load_baseline()
    accuracy = next((row["A"] for row in rows if row["arch"] == baseline.arch.value), None)
    passed = None if accuracy is None else baseline.met_by(accuracy)
    if passed is False:
        logger.warning(
            "%s test accuracy %.4f is below the %.2f floor", baseline.arch.value, accuracy, baseline.min_accuracy
        )
    return {
        "arch": baseline.arch.value,
        "min_accuracy": baseline.min_accuracy,
        "accuracy": accuracy,
        "passed": passed,
        "baseline_accuracy": baseline.achieved_accuracy,
    }


def build_comparison(evaluate_dir: Path, out_dir: Path | None = None) -> Comparison:
    """
    Collect <evaluate_dir>/<arch>/report.json for every architecture that has one and line
    the results up against the published figures; optionally write comparison.csv and
    summary.json to out_dir.
    """
    rows: list[dict[str, Any]] = []
    for arch in Arch:
        report_path = evaluate_dir / arch.value / REPORT_FILE
        if not report_path.is_file():
            continue
        data = read_json(report_path)
        metrics = MetricsReport.from_dict(data["metrics"])
        reference = REFERENCE_METRICS[arch]
        rows.append(
            {
                "arch": arch.value,
                "parameters": int(data.get("parameter_count", 0)),
                "reference_parameters": REFERENCE_PARAMETER_COUNTS[arch],
                **{header: value for header, value in zip(_METRIC_HEADERS, metrics.summary().values())},
                **{f"ref_{header}": value for header, value in zip(_METRIC_HEADERS, reference.summary().values())},
                "most_confused": _pair_name(most_confused_pair(metrics.confusion)),
            }
        )
    table = pd.DataFrame(rows)
    text = render_table(
        ["arch", "params", *_METRIC_HEADERS, "most confused"],
        [
            [
                row["arch"],
                f"{row['parameters']:,}",
                *(f"{row[header]:.4f}" for header in _METRIC_HEADERS),
                row["most_confused"],
            ]
            for row in rows
        ],
    )
    confused = [row["most_confused"] for row in rows]
    summary = {
        "architectures": [row["arch"] for row in rows],
        "rows": rows,
        "types_ii_iii_most_confused": sum(pair == _pair_name((1, 2)) for pair in confused),
        "learning_signal": _learning_signal(rows),
    }
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        table.to_csv(out_dir / COMPARISON_FILE, index=False)
        write_json(out_dir / SUMMARY_FILE, summary)
    if not rows:
        logger.warning("No evaluation reports found under %s", evaluate_dir)
    return Comparison(table, text, summary)
