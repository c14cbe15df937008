"""
JSON persistence for Choi matrices and masks.
Files are validated against a JSON schema before parsing. Real and imaginary
parts are stored as separate row-major arrays; Python's float repr keeps the
round trip bit-exact.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Union

import jsonschema
import numpy as np

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.choi.masks import validate_mask
from choiforge.core.tensor_core import HermitianOperator
from choiforge.exceptions import InputError

logger = logging.getLogger(__name__)

_MATRIX = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "number"}},
}

CHOI_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["d_in", "d_out", "re", "im"],
    "properties": {
        "d_in": {"type": "integer", "minimum": 1},
        "d_out": {"type": "integer", "minimum": 1},
        "re": _MATRIX,
        "im": _MATRIX,
        "flags": {
            "type": "object",
            "properties": {"tp": {"type": "boolean"}, "real": {"type": "boolean"}},
        },
    },
}

MASK_SCHEMA: Dict[str, Any] = {
    "type": "object",
    "required": ["d_in", "d_out", "mask"],
    "properties": {
        "d_in": {"type": "integer", "minimum": 1},
        "d_out": {"type": "integer", "minimum": 1},
        "mask": {
            "type": "array",
            "items": {"type": "array", "items": {"type": "integer", "enum": [0, 1]}},
        },
    },
}


def _read_json(path: Union[str, Path], schema: Dict[str, Any]) -> Dict[str, Any]:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"File not found: {p}")
    try:
        with open(p) as f:
            data = json.load(f)
        jsonschema.validate(data, schema)
    except json.JSONDecodeError as e:
        raise InputError(f"Malformed JSON in {p}: {str(e)}")
    except jsonschema.ValidationError as e:
        raise InputError(f"Invalid content in {p}: {e.message}")
    return data


def _square(rows: Any, n: int, label: str) -> np.ndarray:
    arr = np.asarray(rows, dtype=float)
    if arr.shape != (n, n):
        raise InputError(f"{label} has shape {arr.shape}, expected {(n, n)}")
    return arr


def choi_to_dict(choi: ChoiMatrix) -> Dict[str, Any]:
    m = choi.array
    return {
        "d_in": choi.d_in,
        "d_out": choi.d_out,
        "re": m.real.tolist(),
        "im": m.imag.tolist(),
        "flags": {"tp": choi.tp, "real": choi.real},
    }


def choi_from_dict(data: Dict[str, Any]) -> ChoiMatrix:
    jsonschema.validate(data, CHOI_SCHEMA)
    d_in, d_out = data["d_in"], data["d_out"]
    n = d_in * d_out
    re = _square(data["re"], n, "Real part")
    im = _square(data["im"], n, "Imaginary part")
    flags = data.get("flags", {})
    matrix = re + 1j * im
    if not np.array_equal(matrix, matrix.conj().T):
        raise InputError("Choi matrix in file is not Hermitian")
    return ChoiMatrix(
        d_in,
        d_out,
        HermitianOperator(matrix),
        tp=flags.get("tp", False),
        real=flags.get("real", False),
    )


def save_choi(choi: ChoiMatrix, path: Union[str, Path]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w") as f:
        json.dump(choi_to_dict(choi), f)
    logger.debug(f"Wrote Choi matrix ({choi.d_in}x{choi.d_out}) to {p}")
    return p


def load_choi(path: Union[str, Path]) -> ChoiMatrix:
    data = _read_json(path, CHOI_SCHEMA)
    try:
        return choi_from_dict(data)
    except InputError as e:
        raise InputError(f"{path}: {str(e)}")


def save_mask(mask: np.ndarray, d_in: int, d_out: int, path: Union[str, Path]) -> Path:
    p = Path(path)
    p.parent.mkdir(parents=True, exist_ok=True)
    with open(p, "w") as f:
        json.dump({"d_in": d_in, "d_out": d_out, "mask": np.asarray(mask, dtype=int).tolist()}, f)
    return p


def load_mask(path: Union[str, Path]) -> np.ndarray:
    """Read and validate a mask file"""
    data = _read_json(path, MASK_SCHEMA)
    d_in, d_out = data["d_in"], data["d_out"]
    mask = np.asarray(data["mask"], dtype=int)
    return validate_mask(mask, d_in, d_out)
