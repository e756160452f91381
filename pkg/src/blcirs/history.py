"""Delimited on-disk formats: per-run histories, summaries, comparisons.

History schema (version 1): comment lines ``# key=value`` carry run metadata
(at least ``schema``, ``solver``, ``variant``, ``norm_b``, ``n``, ``s``,
``seed``), followed by a CSV header and one row per iteration.  Floats are
written with shortest-round-trip decimals; empty fields mean "not recorded".
"""

import csv

from .diagnostics import ConvergenceRecord

__all__ = [
    "SCHEMA_VERSION",
    "HISTORY_COLUMNS",
    "write_history",
    "read_history",
    "write_summary",
    "format_summary_table",
    "write_compare",
]

SCHEMA_VERSION = 1

HISTORY_COLUMNS = [
    "k", "spmm_count", "rel_r", "rel_s", "true_rel_r", "true_rel_s",
    "norm_x", "norm_y", "gap_r", "gap_s", "q_norm", "q_departure",
]

SUMMARY_COLUMNS = ["matrix", "solver", "s", "seed", "iterations", "time_s",
                   "true_res", "status"]

COMPARE_COLUMNS = ["solver", "spmm_count", "rel_r", "rel_s", "norm_x", "norm_y"]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_history(path, records, meta=None):
    """Write one run history; ``meta`` maps metadata keys to values."""
    meta = dict(meta or {})
    meta.setdefault("schema", SCHEMA_VERSION)
    with open(path, "w", newline="") as handle:
        for key in sorted(meta):
            handle.write(f"# {key}={_fmt(meta[key])}\n")
        writer = csv.writer(handle)
        writer.writerow(HISTORY_COLUMNS)
        for rec in records:
            writer.writerow([_fmt(getattr(rec, col)) for col in HISTORY_COLUMNS])


_INT_META = {"schema", "variant", "n", "s", "seed", "iterations"}
_FLOAT_META = {"norm_b", "tol", "norm_a"}


def read_history(path):
    """Read a history file back into (records, metadata)."""
    meta = {}
    records = []
    with open(path, "r", newline="") as handle:
        rows = []
        for line in handle:
            if line.startswith("#"):
                key, _, value = line[1:].strip().partition("=")
                key = key.strip()
                value = value.strip()
                if key in _INT_META:
                    meta[key] = int(value)
                elif key in _FLOAT_META:
                    meta[key] = float(value)
                else:
                    meta[key] = value
            else:
                rows.append(line)
    reader = csv.reader(rows)
    header = next(reader, None)
    if header != HISTORY_COLUMNS:
        raise ValueError(f"unrecognized history header: {header}")
    for row in reader:
        if not row:
            continue
        fields = dict(zip(HISTORY_COLUMNS, row))
        records.append(ConvergenceRecord(
            k=int(fields["k"]),
            spmm_count=int(fields["spmm_count"]),
            rel_r=float(fields["rel_r"]),
            **{col: (float(fields[col]) if fields[col] else None)
               for col in HISTORY_COLUMNS[3:]},
        ))
    return records, meta


def write_summary(path, rows):
    """Write summary rows (dicts keyed by SUMMARY_COLUMNS)."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(SUMMARY_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in SUMMARY_COLUMNS])


def format_summary_table(rows):
    """Plain-text table with the comparison columns Iter. / Time (s) / True res."""
    header = ("Matrix", "Solver", "s", "Iter.", "Time (s)", "True res.", "Status")
    lines = [header]
    for row in rows:
        true_res = row.get("true_res")
        lines.append((
            str(row.get("matrix", "")),
            str(row.get("solver", "")),
            str(row.get("s", "")),
            str(row.get("iterations", "")),
            f"{row.get('time_s', 0.0):.3f}",
            "-" if true_res is None else f"{true_res:.2e}",
            str(row.get("status", "")),
        ))
    widths = [max(len(line[i]) for line in lines) for i in range(len(header))]
    out = []
    for idx, line in enumerate(lines):
        out.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(line)).rstrip())
        if idx == 0:
            out.append("  ".join("-" * widths[i] for i in range(len(header))))
    return "\n".join(out)


def write_compare(path, rows):
    """Write the multiplication-count-keyed comparison series."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(COMPARE_COLUMNS)
        for row in rows:
            writer.writerow([_fmt(row.get(col)) for col in COMPARE_COLUMNS])
