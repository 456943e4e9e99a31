"""Render a RunReport as CSV or as a plain text table."""
import csv
import io
import sys

CSV_FIELDS = ("label", "truth_x", "truth_y", "est_x", "est_y", "error_m")
FORMATS = ("csv", "table")


class EmptyReportError(ValueError):
    pass


def _fmt(v):
    return "" if v is None else repr(float(v))


def report_csv(report):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_FIELDS)
    for r in report.rows:
        est = r.estimate
        w.writerow(
            [
                r.label,
                _fmt(r.truth.x),
                _fmt(r.truth.y),
                _fmt(est.x if est else None),
                _fmt(est.y if est else None),
                _fmt(r.error_m),
            ]
        )
    return buf.getvalue()


def report_table(report):
    labels = [r.label for r in report.rows]
    cells = [f"{r.error_m:.3f}" if r.ok else "FAILED" for r in report.rows]
    lw = max(len("Point"), *(len(s) for s in labels))
    cw = max(len("Error (m)"), *(len(s) for s in cells))
    lines = [f"{'Point':<{lw}} | {'Error (m)':>{cw}}", f"{'-' * lw}-+-{'-' * cw}"]
    lines += [f"{lbl:<{lw}} | {c:>{cw}}" for lbl, c in zip(labels, cells)]
    return "\n".join(lines) + "\n"


def parse_report_csv(text):
    """Inverse of ``report_csv``; empty fields come back as None."""
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for row in rows:
        out.append({k: (row[k] if k == "label" else (float(row[k]) if row[k] != "" else None)) for k in CSV_FIELDS})
    return out


def emit_report(report, path=None, format="csv"):
    """Write the report to ``path`` (stdout when None or "-"); returns the text."""
    if not report.rows:
        raise EmptyReportError("report has no rows")
    if format not in FORMATS:
        raise ValueError(f"unknown report format {format!r}; choose from {FORMATS}")
    text = report_csv(report) if format == "csv" else report_table(report)
    if path is None or str(path) == "-":
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text
