"""Canonical JSON for reports.

Keys are sorted, floats carry 17 significant digits and non-finite values
become null, so two runs with the same flags and seed write identical bytes.
"""
import json
import math
from pathlib import Path
from typing import Any, Union

from pydantic import BaseModel

from s2pmlp.errors import ReportWriteError
from s2pmlp.logging import get_logger

logger = get_logger("reporting")

_INDENT = "  "


def format_float(value: float) -> str:
    if not math.isfinite(value):
        return "null"
    text = format(value, ".17g")
    if not any(ch in text for ch in ".en"):
        text += ".0"
    return text


def _encode(value: Any, depth: int) -> str:
    pad = _INDENT * (depth + 1)
    close = _INDENT * depth
    if isinstance(value, BaseModel):
        value = value.model_dump()
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f"{pad}{json.dumps(str(key))}: {_encode(value[key], depth + 1)}"
            for key in sorted(value, key=str)
        ]
        return "{\n" + ",\n".join(items) + "\n" + close + "}"
    if isinstance(value, (list, tuple)):
        if not value:
            return "[]"
        return "[\n" + ",\n".join(f"{pad}{_encode(item, depth + 1)}" for item in value) + "\n" + close + "]"
    if isinstance(value, bool) or value is None:
        return json.dumps(value)
    if isinstance(value, float):
        return format_float(value)
    if isinstance(value, int):
        return str(value)
    if hasattr(value, "item"):
        # numpy scalars
        return _encode(value.item(), depth)
    return json.dumps(str(value))


def canonical_json(report: Union[BaseModel, dict, list]) -> str:
    return _encode(report, 0) + "\n"


def emit_report(report: Union[BaseModel, dict, list], path: Union[str, Path]) -> None:
    """Write a report as canonical JSON; IO failures raise ReportWriteError"""
    text = canonical_json(report)
    try:
        Path(path).write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ReportWriteError(f"cannot write report to {path}: {exc}") from exc
    logger.info("report_written", path=str(path), size=len(text))
