# aoi_priority/render.py

import csv
import json
import math
from typing import Any, Iterable, Mapping, Sequence, TextIO

from aoi_priority.serialize import to_jsonable

LABEL_WIDTH = 14


def format_cell(value: Any) -> str:
    """
    CSV cell: shortest round-trip repr for floats, empty for missing or
    non-finite values, lowercase booleans.
    """
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value) if math.isfinite(value) else ""
    return str(value)


def render_json(obj: Any) -> str:
    return json.dumps(to_jsonable(obj), indent=2)


def render_csv(rows: Iterable[Mapping[str, Any]], columns: Sequence[str], out: TextIO) -> None:
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([format_cell(row.get(c)) for c in columns])


def render_text(fields: Mapping[str, Any], title: str = "") -> str:
    """Aligned `name: value` block for terminals."""
    lines: list[str] = []
    if title:
        lines.append(title)
        lines.append("-" * len(title))

    for name, value in fields.items():
        if isinstance(value, float):
            shown = f"{value:.6g}" if math.isfinite(value) else "n/a"
        elif value is None:
            shown = "n/a"
        else:
            shown = str(value)
        lines.append(f"{name:<{LABEL_WIDTH}} {shown}")

    return "\n".join(lines)


def render_checks(checks: Iterable[Mapping[str, Any]]) -> str:
    """One line per validation check: status, name, expected, observed, tolerance."""
    lines: list[str] = []
    for c in checks:
        status = "PASS" if c["passed"] else "FAIL"
        lines.append(
            f"[{status}] {c['name']}: expected {_short(c.get('expected'))}, "
            f"observed {_short(c.get('observed'))}, tolerance {_short(c.get('tolerance'))}"
        )
        if c.get("detail"):
            lines.append(f"       {c['detail']}")
    return "\n".join(lines)


def _short(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.6g}"
    if value is None:
        return "-"
    return str(value)
