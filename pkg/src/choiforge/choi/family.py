"""
Masked 3x3 map family with parameters (a, b, c, w, z).
The Choi matrix has diagonal (a, b, c, c, a, b, b, c, a), the coherence w
between |0,1> and |1,0>, the coherence z between |0,0> and |2,2>, and zeros
elsewhere.
"""

import logging
from dataclasses import dataclass

import numpy as np

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.core.tensor_core import HermitianOperator
from choiforge.exceptions import InputError

logger = logging.getLogger(__name__)

# (row, col) positions of the coherences, upper triangle
W_ENTRY = (1, 3)
Z_ENTRY = (0, 8)


@dataclass(frozen=True)
class FamilyParams:
    """Family parameters; a, b, c non-negative"""

    a: float
    b: float
    c: float
    w: complex = 0.0
    z: complex = 0.0

    def __post_init__(self):
        if min(self.a, self.b, self.c) < 0:
            raise InputError(
                f"Family weights must be non-negative, got a={self.a}, b={self.b}, c={self.c}"
            )

    @property
    def trace_preserving(self) -> bool:
        return bool(np.isclose(self.a + self.b + self.c, 1.0, rtol=0, atol=1e-12))


def family_choi(params: FamilyParams) -> ChoiMatrix:
    """Choi matrix of the family member at params"""
    a, b, c = params.a, params.b, params.c
    matrix = np.diag(np.array([a, b, c, c, a, b, b, c, a], dtype=np.complex128))
    matrix[W_ENTRY] = params.w
    matrix[W_ENTRY[::-1]] = np.conj(params.w)
    matrix[Z_ENTRY] = params.z
    matrix[Z_ENTRY[::-1]] = np.conj(params.z)
    return ChoiMatrix(3, 3, HermitianOperator(matrix), tp=params.trace_preserving)


def family_action(params: FamilyParams, rho: np.ndarray) -> np.ndarray:
    """Closed-form action of the family member on a 3x3 operator"""
    a, b, c = params.a, params.b, params.c
    w, z = complex(params.w), complex(params.z)
    r = np.asarray(rho)
    out = np.zeros((3, 3), dtype=np.complex128)
    out[0, 0] = a * r[0, 0] + c * r[1, 1] + b * r[2, 2]
    out[1, 1] = b * r[0, 0] + a * r[1, 1] + c * r[2, 2]
    out[2, 2] = c * r[0, 0] + b * r[1, 1] + a * r[2, 2]
    out[0, 1] = np.conj(w) * r[1, 0]
    out[1, 0] = w * r[0, 1]
    out[0, 2] = z * r[0, 2]
    out[2, 0] = np.conj(z) * r[2, 0]
    return out
