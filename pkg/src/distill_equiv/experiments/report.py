"""CSV / JSON report writing.

Floats are rendered with 17 significant digits in CSV (``repr`` in JSON), so
every value parses back to the identical float64. Files are written to a
temporary sibling and renamed into place, so a failed write never leaves a
truncated report behind.
"""

import csv
import io
import json
import math
import os
import tempfile

import numpy as np


def render_value(value):
    if value is None:
        return ""
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    return str(value)


def _json_value(value):
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    if isinstance(value, dict):
        return {k: _json_value(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, np.ndarray)):
        return [_json_value(v) for v in value]
    return value


def render_csv(columns, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, delimiter=",", lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([render_value(row.get(c)) for c in columns])
    return buf.getvalue()


def render_json(columns, rows, meta=None):
    doc = dict(meta or {})
    doc["columns"] = list(columns)
    doc["rows"] = [{c: _json_value(row.get(c)) for c in columns} for row in rows]
    return json.dumps(_json_value(doc), indent=2, allow_nan=False) + "\n"


def write_report(columns, rows, path, fmt="csv", meta=None):
    """Write ``rows`` (dicts keyed by ``columns``) to ``path`` atomically."""
    if fmt == "csv":
        text = render_csv(columns, rows)
    elif fmt == "json":
        text = render_json(columns, rows, meta)
    else:
        raise ValueError(f"unknown report format {fmt!r}")
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    try:
        fd, tmp = tempfile.mkstemp(prefix=".report-", dir=directory)
    except OSError as exc:
        raise OSError(f"cannot write report {path}: {exc}") from exc
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o644)
        os.replace(tmp, path)
    except BaseException as exc:
        if os.path.exists(tmp):
            os.unlink(tmp)
        if isinstance(exc, OSError):
            raise OSError(f"cannot write report {path}: {exc}") from exc
        raise
    return path
