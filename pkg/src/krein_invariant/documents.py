"""JSON documents exchanged by the command-line tool.

An operator document looks like::

    {"n_plus": 1, "n_minus": 1,
     "matrix": [[0, 2], [0, 0], [1, 0], [0, -1]],
     "name": "anchor", "seed": 0}

``matrix`` lists the ``(n_plus + n_minus)^2`` entries row-major, each as an
``[re, im]`` pair.
"""

from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np

from .errors import KreinError
from .krein import BlockOperator, KreinStructure


class DocumentError(KreinError, ValueError):
    """Malformed operator or report document."""


def encode_complex(z) -> list:
    z = complex(z)
    return [_num(z.real), _num(z.imag)]


def _num(x: float):
    x = float(x)
    if x == 0:
        return 0.0
    return x if math.isfinite(x) else None


def encode_matrix(M) -> list:
    M = np.atleast_2d(np.asarray(M, dtype=complex))
    return [encode_complex(z) for z in M.ravel(order="C")]


def decode_complex(pair, where: str) -> complex:
    if (
        not isinstance(pair, list)
        or len(pair) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in pair)
    ):
        raise DocumentError(f"{where}: expected an [re, im] pair of numbers, got {pair!r}")
    z = complex(pair[0], pair[1])
    if not (math.isfinite(z.real) and math.isfinite(z.imag)):
        raise DocumentError(f"{where}: non-finite entry")
    return z


def decode_matrix(entries, rows: int, cols: int, field: str) -> np.ndarray:
    if not isinstance(entries, list):
        raise DocumentError(f"{field}: expected a list of [re, im] pairs")
    if len(entries) != rows * cols:
        raise DocumentError(f"{field}: expected {rows * cols} entries ({rows}x{cols}), got {len(entries)}")
    vals = [decode_complex(e, f"{field}[{k}]") for k, e in enumerate(entries)]
    return np.array(vals, dtype=complex).reshape(rows, cols)


def operator_to_document(A: BlockOperator, name: str | None = None, seed: int | None = None) -> dict:
    doc = {"n_plus": A.n_plus, "n_minus": A.n_minus, "matrix": encode_matrix(A.matrix)}
    if name is not None:
        doc["name"] = name
    if seed is not None:
        doc["seed"] = seed
    return doc


def operator_from_document(doc) -> BlockOperator:
    if not isinstance(doc, dict):
        raise DocumentError("operator document must be a JSON object")
    dims = []
    for key in ("n_plus", "n_minus"):
        v = doc.get(key)
        if not isinstance(v, int) or isinstance(v, bool) or v < 1:
            raise DocumentError(f"field {key!r}: expected a positive integer, got {v!r}")
        dims.append(v)
    n = sum(dims)
    M = decode_matrix(doc.get("matrix"), n, n, "matrix")
    return BlockOperator(KreinStructure(*dims), M)


def parse_json(text: str, source: str = "<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise DocumentError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from exc


def load_operator(path: str | Path) -> tuple[BlockOperator, dict]:
    text = Path(path).read_text(encoding="utf-8") if str(path) != "-" else _stdin()
    doc = parse_json(text, str(path))
    return operator_from_document(doc), doc


def _stdin() -> str:
    import sys

    return sys.stdin.read()


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def digest(A: BlockOperator) -> str:
    """SHA-256 of the canonical encoding of the operator (metadata excluded)."""
    doc = operator_to_document(A)
    return "sha256:" + hashlib.sha256(canonical_json(doc).encode()).hexdigest()


def dump(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"
