"""JSON input documents and CSV/JSON output helpers.

Input document::

    {"m": 2, "kraus": [[[1, 0], [0, 1]], [[1, 0], [0, -1]]], "label": "pauli-z"}

or, instead of ``kraus``, a ``choi`` matrix of size ``m^2``.  Each entry is
either a bare number (real) or a two-element ``[re, im]`` array.
"""
import json
import math

import numpy as np

from .cpmap import ChoiMatrix, KrausTuple, kraus_from_choi
from .errors import DomainError


class InputError(DomainError):
    """Malformed input document; the message names the offending field."""


def _entry(value, where):
    if isinstance(value, bool):
        raise InputError(f"{where}: booleans are not matrix entries")
    if isinstance(value, (int, float)):
        return complex(float(value), 0.0)
    if isinstance(value, list) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        return complex(float(value[0]), float(value[1]))
    raise InputError(f"{where}: expected a number or a [re, im] pair, got {json.dumps(value)}")


def parse_matrix(rows, size, where):
    if not isinstance(rows, list) or len(rows) != size:
        got = len(rows) if isinstance(rows, list) else type(rows).__name__
        raise InputError(f"{where}: expected {size} rows, got {got}")
    out = np.zeros((size, size), dtype=np.complex128)
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != size:
            got = len(row) if isinstance(row, list) else type(row).__name__
            raise InputError(f"{where}[{i}]: expected {size} entries, got {got}")
        for j, v in enumerate(row):
            out[i, j] = _entry(v, f"{where}[{i}][{j}]")
    return out


def parse_document(doc):
    """Validate a decoded document and return ``(KrausTuple, label)``."""
    if not isinstance(doc, dict):
        raise InputError("top level: expected a JSON object")
    m = doc.get("m")
    if isinstance(m, bool) or not isinstance(m, int) or m < 1:
        raise InputError(f"m: expected a positive integer, got {json.dumps(m)}")
    has_k, has_c = "kraus" in doc, "choi" in doc
    if has_k == has_c:
        raise InputError("exactly one of 'kraus' and 'choi' must be present")
    label = doc.get("label")
    if has_k:
        mats = doc["kraus"]
        if not isinstance(mats, list) or not mats:
            raise InputError("kraus: expected a non-empty list of matrices")
        eta = KrausTuple([parse_matrix(a, m, f"kraus[{i}]") for i, a in enumerate(mats)])
    else:
        c = parse_matrix(doc["choi"], m * m, "choi")
        try:
            eta = kraus_from_choi(ChoiMatrix(m, c))
        except DomainError as exc:
            raise InputError(f"choi: {exc}") from None
    return eta, label


def load_document(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_document(doc)


def load_matrix(path, size):
    """A bare ``size x size`` matrix (same entry encoding) from a JSON file."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if isinstance(doc, dict) and "matrix" in doc:
        doc = doc["matrix"]
    return parse_matrix(doc, size, str(path))


def encode_entry(z):
    z = complex(z)
    if z.imag == 0.0:
        re = z.real
        return int(re) if re.is_integer() and abs(re) < 2**53 else re
    return [z.real, z.imag]


def kraus_document(eta, label=None):
    doc = {
        "m": eta.m,
        "kraus": [[[encode_entry(x) for x in row] for row in a] for a in eta.kraus],
    }
    if label is not None:
        doc["label"] = label
    return doc


def sanitize(obj):
    """Make ``obj`` strict-JSON-safe: non-finite floats become strings."""
    if isinstance(obj, dict):
        return {str(k): sanitize(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [sanitize(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return sanitize(obj.tolist())
    return obj


def dumps(obj):
    return json.dumps(sanitize(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def fmt17(x):
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(v if isinstance(v, str) else fmt17(v) if isinstance(v, float) else str(v) for v in row) + "\n")
