"""JSON and CSV report writers.

JSON reports wrap a command's result in a versioned envelope::

    {"schema_version": "1.0", "generated_at": ..., "command": ...,
     "config": {...resolved key=value config...}, "result": {...}}

and are validated against ``schemas/report.schema.json`` before they are
written. Keys are sorted so two runs with the same config differ only in
``generated_at``.
"""
from __future__ import annotations

import csv
import json
import math
from datetime import datetime, timezone
from functools import lru_cache
from importlib import resources
from pathlib import Path

import jsonschema

from . import __version__

SCHEMA_VERSION = "1.0"
TIMESTAMP_FIELD = "generated_at"


class ReportError(OSError):
    """A report could not be written; the message names the path."""


def _clean(obj):
    """Make a result JSON-safe: tuples to lists, complex to [re, im], inf/nan to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, bool) or obj is None or isinstance(obj, str):
        return obj
    if isinstance(obj, complex):
        return [_clean(obj.real), _clean(obj.imag)]
    if isinstance(obj, int):
        return obj
    if hasattr(obj, "item"):  # numpy scalar
        return _clean(obj.item())
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    return str(obj)


def build_report(command: str, config: dict, result: dict, timestamp: str | None = None) -> dict:
    return {
        "schema_version": SCHEMA_VERSION,
        TIMESTAMP_FIELD: timestamp or datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "package_version": __version__,
        "command": command,
        "config": _clean(config),
        "result": _clean(result),
    }


@lru_cache(maxsize=1)
def load_schema() -> dict:
    text = resources.files("qubitdist").joinpath("schemas/report.schema.json").read_text()
    return json.loads(text)


def validate_report(report: dict) -> None:
    """Raise ``jsonschema.ValidationError`` if ``report`` breaks the schema."""
    jsonschema.validate(report, load_schema())


def dumps(report: dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2, allow_nan=False) + "\n"


def write_json(report: dict, path) -> Path:
    validate_report(report)
    return _write_text(path, dumps(report))


def _write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as exc:
        raise ReportError(f"cannot write report to {path}: {exc.strerror or exc}") from exc
    return path


def flatten(d: dict, prefix: str = "") -> dict:
    """Nested dict to one level with dotted keys; lists become ';'-joined strings."""
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        elif isinstance(v, (list, tuple)):
            out[key] = ";".join(str(x) for x in v)
        else:
            out[key] = v
    return out


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, bool):
        return int(v)
    return v


def write_csv(rows: list[dict], path, columns=None) -> Path:
    """Rows with a header. ``columns`` fixes the order; otherwise first-seen order."""
    if columns is None:
        columns = list(dict.fromkeys(k for r in rows for k in r))
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(columns), extrasaction="ignore")
            w.writeheader()
            for r in rows:
                w.writerow({k: _cell(v) for k, v in r.items()})
    except OSError as exc:
        raise ReportError(f"cannot write CSV to {path}: {exc.strerror or exc}") from exc
    return path


def aggregate_row(config: dict, result: dict) -> dict:
    """Single CSV row: the flattened result followed by the config echo."""
    row = flatten(_clean(result))
    row.update({f"config.{k}": v for k, v in _clean(config).items()})
    return row
