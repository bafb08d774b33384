"""Report assembly and deterministic emission.

A report pairs every simulated statistic with its analytic oracle value and
renders to two flat formats: a structured text document and a comma-separated
table.  Output bytes depend only on the report content: keys keep insertion
order and every number is formatted with six significant digits.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path


def fmt(value):
    """Six-significant-digit formatting; non-numbers pass through as str."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        return str(value)
    if isinstance(value, int):
        return str(value)
    return f"{value:.6g}"


@dataclass
class Report:
    """Everything one experiment run produced, ready for rendering."""

    kind: str
    config_items: list = field(default_factory=list)
    rows: list = field(default_factory=list)
    correlations: list = field(default_factory=list)
    scalars: list = field(default_factory=list)
    diagnostics: list = field(default_factory=list)
    regime_violation: bool = False

    @property
    def exit_code(self):
        return 2 if self.regime_violation else 0


def render_text(report):
    out = io.StringIO()
    w = out.write
    w(f"experiment: {report.kind}\n")
    w("\n[config]\n")
    for key, value in report.config_items:
        w(f"{key} = {fmt(value)}\n")
    if report.rows:
        w("\n[probabilities]\n")
        w("label, count, probability, std_error, oracle, discrepancy\n")
        for row in report.rows:
            w(", ".join([
                row["label"], str(row["count"]), fmt(row["probability"]),
                fmt(row["std_error"]), fmt(row["oracle"]),
                fmt(row["probability"] - row["oracle"]),
            ]) + "\n")
    if report.correlations:
        w("\n[correlations]\n")
        w("label, estimate, std_error, oracle, discrepancy\n")
        for row in report.correlations:
            w(", ".join([
                row["label"], fmt(row["estimate"]), fmt(row["std_error"]),
                fmt(row["oracle"]), fmt(row["estimate"] - row["oracle"]),
            ]) + "\n")
    if report.scalars:
        w("\n[results]\n")
        for row in report.scalars:
            line = f"{row['label']} = {fmt(row['value'])}"
            if row.get("std_error") is not None:
                line += f" +/- {fmt(row['std_error'])}"
            if row.get("oracle") is not None:
                line += f"   (oracle {fmt(row['oracle'])})"
            w(line + "\n")
    if report.diagnostics:
        w("\n[diagnostics]\n")
        for key, value in report.diagnostics:
            w(f"{key} = {fmt(value)}\n")
    w(f"\nregime_violation = {str(report.regime_violation).lower()}\n")
    return out.getvalue()


def render_table(report):
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(
        ["section", "label", "value", "std_error", "oracle", "discrepancy"]
    )
    for row in report.rows:
        writer.writerow([
            "probability", row["label"], fmt(row["probability"]),
            fmt(row["std_error"]), fmt(row["oracle"]),
            fmt(row["probability"] - row["oracle"]),
        ])
    for row in report.correlations:
        writer.writerow([
            "correlation", row["label"], fmt(row["estimate"]),
            fmt(row["std_error"]), fmt(row["oracle"]),
            fmt(row["estimate"] - row["oracle"]),
        ])
    for row in report.scalars:
        oracle = row.get("oracle")
        se = row.get("std_error")
        writer.writerow([
            "result", row["label"], fmt(row["value"]),
            "" if se is None else fmt(se),
            "" if oracle is None else fmt(oracle),
            "" if oracle is None else fmt(row["value"] - oracle),
        ])
    for key, value in report.diagnostics:
        writer.writerow(["diagnostic", key, fmt(value), "", "", ""])
    return out.getvalue()


def probability_rows(prob_report):
    """Rows of a ProbabilityReport in report form."""
    rows = []
    for k, label in enumerate(prob_report.labels):
        rows.append({
            "label": label,
            "count": int(prob_report.counts[k]),
            "probability": float(prob_report.probabilities[k]),
            "std_error": float(prob_report.std_errors[k]),
            "oracle": float(prob_report.oracle[k]),
        })
    return rows


def emit_report(report, out_dir, out_format="report"):
    """Write report.txt and table.csv (plus figures elsewhere); returns paths.

    Both files are always written; out_format selects which one the CLI
    echoes to standard output.
    """
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    text_path = directory / "report.txt"
    table_path = directory / "table.csv"
    text_path.write_text(render_text(report))
    table_path.write_text(render_table(report))
    return {"report": text_path, "table": table_path}
