"""Report emission: JSON with 17-significant-digit floats, CSV helpers, schema check."""
from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

import numpy as np

SCHEMA_VERSION = "1.0"


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        return "null"
    s = "%.17g" % x
    if "." not in s and "e" not in s and "n" not in s:
        s += ".0"
    return s


def _emit(obj, indent: int, level: int, out: list) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append("null" if obj is None else ("true" if obj else "false"))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_fmt_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, np.ndarray):
        _emit(obj.tolist(), indent, level, out)
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = list(obj.items())
        for k, (key, val) in enumerate(items):
            out.append(pad + json.dumps(str(key)) + ": ")
            _emit(val, indent, level + 1, out)
            out.append(",\n" if k < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        if all(isinstance(v, (int, float, np.integer, np.floating)) and not isinstance(v, bool)
               for v in obj):
            out.append("[")
            for k, v in enumerate(obj):
                _emit(v, indent, level + 1, out)
                if k < len(obj) - 1:
                    out.append(", ")
            out.append("]")
            return
        out.append("[\n")
        for k, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if k < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif hasattr(obj, "to_dict"):
        _emit(obj.to_dict(), indent, level, out)
    else:
        raise TypeError(f"cannot serialise {type(obj).__name__}")


def dumps(obj, indent: int = 2) -> str:
    """Deterministic JSON text; every float is written with ``%.17g``."""
    out: list = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def write_json(obj, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj), encoding="utf-8")
    return path


def load_schema() -> dict:
    text = resources.files("sphere_bubbling").joinpath("schemas/report.schema.json").read_text("utf-8")
    return json.loads(text)


def validate_report(report: dict) -> None:
    """Validate against the shipped schema (needs the optional ``jsonschema`` package).

    Raises
    ------
    jsonschema.ValidationError
        If the report does not conform.
    """
    import jsonschema

    jsonschema.validate(json.loads(dumps(report)), load_schema())


def make_report(command: str, config: dict, status: str, exit_code: int, results: dict,
                failures: list | None = None) -> dict:
    from . import __version__
    from .kernels import BACKEND

    return {"schema_version": SCHEMA_VERSION, "command": command, "version": __version__,
            "kernel_backend": BACKEND, "status": status, "exit_code": int(exit_code),
            "config": config, "results": results, "failures": list(failures or [])}
