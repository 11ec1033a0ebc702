"""Tabular output shared by every command.

A result is a list of rows over a fixed column list; numbers go through
``fmt_value`` once, so the aligned table and the delimited file always
print the same digits.
"""
from __future__ import annotations

import csv
import io
import math
from pathlib import Path

import numpy as np

from .errors import SeqGiniError

MC_COLUMNS = ("law", "procedure", "design", "delta", "pilot", "reps",
              "mean_final_size", "sd_final_size", "mean_g_hat", "ratio_size_to_C",
              "mean_v2_over_xi2", "coverage", "coverage_se", "mean_width", "sd_width",
              "exceed_rate", "exceed_se", "C", "xi2", "analytic_gini", "capped")

RUN_COLUMNS = ("source", "procedure", "H", "final_n", "pilot", "g_hat", "se", "ci_low",
               "ci_high", "width", "hit_cap")

ESTIMATE_COLUMNS = ("source", "n", "households", "g_hat", "mu_hat", "v2", "se", "ci_low",
                    "ci_high", "width")

FIXED_COLUMNS = ("source", "n", "reps", "mean_width", "sd_width", "threshold", "exceed_rate",
                 "mean_g_hat")

PILOT_COLUMNS = ("alpha", "omega", "delta", "m", "m_s", "realized")

FIXED_COMPARE_COLUMNS = ("law", "n_fixed", "reps", "mean_v2_proposed", "mean_v2_comparator",
                         "diff_se", "mean_g_proposed", "mean_g_comparator")


class ReportError(SeqGiniError):
    pass


def fmt_value(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        if math.isnan(v):
            return "nan"
        return "%.6g" % v
    if isinstance(v, (tuple, list)):
        return ";".join(fmt_value(x) for x in v)
    return str(v)


def mc_row(report) -> dict:
    return {c: getattr(report, c) for c in MC_COLUMNS}


def run_row(outcome, source: str, H: int) -> dict:
    return dict(source=source, procedure=outcome.procedure, H=H, final_n=outcome.final_n,
                pilot=outcome.pilot, g_hat=outcome.g_hat, se=outcome.se, ci_low=outcome.ci_low,
                ci_high=outcome.ci_high, width=outcome.width, hit_cap=outcome.hit_cap)


def render(columns, rows, format: str) -> str:
    cells = [[fmt_value(r[c]) for c in columns] for r in rows]
    if format == "delimited":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(columns)
        w.writerows(cells)
        return buf.getvalue()
    if format != "table":
        raise ReportError(f"unknown format {format!r}")
    widths = [max([len(c)] + [len(row[i]) for row in cells]) for i, c in enumerate(columns)]
    lines = ["  ".join(c.rjust(wd) for c, wd in zip(columns, widths))]
    lines.append("  ".join("-" * wd for wd in widths))
    lines += ["  ".join(v.rjust(wd) for v, wd in zip(row, widths)) for row in cells]
    return "\n".join(lines) + "\n"


def write_report(columns, rows, path, format: str) -> Path:
    path = Path(path)
    text = render(columns, rows, format)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportError(f"cannot write {path}: {exc.strerror}")
    return path


def read_delimited(path) -> list:
    """Rows of a delimited report as dicts of strings."""
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))
