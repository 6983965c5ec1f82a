"""Deterministic text emission: every float is written with 17 significant
digits, which round-trips IEEE doubles exactly."""
import hashlib
import json
import math

import numpy as np


def fmt(x):
    """Format a float with 17 significant digits."""
    return format(float(x), ".17g")


def _json_float(x):
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(ch in s for ch in ".en"):
        s += ".0"
    return s


def _emit(obj, out, indent, level):
    pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
    end = "" if indent is None else "\n" + " " * (indent * level)
    if isinstance(obj, (bool, np.bool_)):
        out.append("true" if obj else "false")
    elif obj is None:
        out.append("null")
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_json_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{")
        for j, (k, v) in enumerate(obj.items()):
            if j:
                out.append(",")
            out.append(pad)
            out.append(json.dumps(str(k)) + ": ")
            _emit(v, out, indent, level + 1)
        out.append(end + "}")
    elif isinstance(obj, (list, tuple, np.ndarray)):
        items = obj.tolist() if isinstance(obj, np.ndarray) else obj
        # numeric rows stay on one line
        flat = indent is None or all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in items)
        if not items:
            out.append("[]")
            return
        out.append("[")
        for j, v in enumerate(items):
            if j:
                out.append(", " if flat else ",")
            if not flat:
                out.append(pad)
            _emit(v, out, None if flat else indent, level + 1)
        out.append("]" if flat else end + "]")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj, indent=1):
    """JSON text with 17-significant-digit floats. Keys keep insertion order."""
    out = []
    _emit(obj, out, indent, 0)
    return "".join(out) + "\n"


def loads(text):
    return json.loads(text)


def csv_text(header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_csv(text):
    lines = text.strip().splitlines()
    header = lines[0].split(",")
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]], dtype=float)
    return header, data.reshape(len(lines) - 1, len(header))


def sha256_file(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 16), b""):
            h.update(block)
    return h.hexdigest()
