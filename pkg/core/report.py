"""
Machine-readable experiment reports.
JSON with a fixed key order, CSV summaries and CSV sample tables.
"""

import csv
import io
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Union

logger = logging.getLogger(__name__)

REPORT_KEYS = ("experiment", "config_digest", "seed", "tolerances", "summary", "samples", "error", "hint")
LEG_TABLE_HEADER = ("leg_type", "x1", "x2", "t", "n_used", "residual")


@dataclass
class Report:
    experiment: str
    config_digest: str
    seed: int
    tolerances: Dict[str, float] = field(default_factory=dict)
    summary: Dict[str, Any] = field(default_factory=dict)
    samples: Optional[List[str]] = None
    error: Optional[str] = None
    hint: Optional[str] = None

    def add_table(self, name: str) -> None:
        if self.samples is None:
            self.samples = []
        self.samples.append(name)


def _jsonable(value: Any) -> Any:
    """Plain JSON value; non-finite floats become the strings inf, -inf, nan."""
    if getattr(value, "ndim", None) == 0:
        value = value.item()
    if isinstance(value, bool) or value is None or isinstance(value, str):
        return value
    if isinstance(value, int):
        return int(value)
    if isinstance(value, float):
        number = float(value)
        if math.isnan(number):
            return "nan"
        if math.isinf(number):
            return "inf" if number > 0 else "-inf"
        return number
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if hasattr(value, "tolist"):
        return _jsonable(value.tolist())
    return str(value)


def report_to_dict(report: Report) -> Dict[str, Any]:
    return {key: _jsonable(getattr(report, key)) for key in REPORT_KEYS}


def render_json(report: Report) -> str:
    return json.dumps(report_to_dict(report), indent=2, allow_nan=False) + "\n"


def _write(path: Path, text: str) -> Path:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            f.write(text)
    except OSError as e:
        raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    return path


def _format_cell(value: Any) -> str:
    value = _jsonable(value)
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value) if not isinstance(value, float) else repr(value)


def _flatten(prefix: str, value: Any, rows: List[List[str]]) -> None:
    if isinstance(value, dict):
        for key, inner in value.items():
            _flatten(f"{prefix}.{key}" if prefix else str(key), inner, rows)
    else:
        rows.append([prefix, _format_cell(value)])


def render_csv(report: Report) -> str:
    """Summary as key,value rows; nested keys are dotted."""
    rows: List[List[str]] = []
    for key in REPORT_KEYS:
        if key == "samples":
            _flatten(key, ";".join(report.samples) if report.samples else None, rows)
        else:
            _flatten(key, getattr(report, key), rows)
    return _csv_text(("key", "value"), rows)


def _csv_text(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_format_cell(v) for v in row])
    return buffer.getvalue()


def emit_report(report: Report, out_dir: Union[str, Path], fmt: str = "json") -> Path:
    """
    Write the report as <out_dir>/<experiment>.json or .csv.

    Raises:
        ValueError: for an unknown format
        OSError: if the file cannot be written; the message names the path
    """
    if fmt not in ("json", "csv"):
        raise ValueError(f"report format must be json or csv, got {fmt!r}")
    out = Path(out_dir)
    path = out / f"{report.experiment}.{fmt}"
    text = render_json(report) if fmt == "json" else render_csv(report)
    logger.debug("writing report %s", path)
    return _write(path, text)


def write_table(
    report: Report,
    out_dir: Union[str, Path],
    name: str,
    header: Sequence[str],
    rows: Sequence[Sequence[Any]],
) -> Path:
    """Write <out_dir>/<experiment>_<name>.csv and record it on the report."""
    path = Path(out_dir) / f"{report.experiment}_{name}.csv"
    _write(path, _csv_text(header, rows))
    report.add_table(path.name)
    return path
