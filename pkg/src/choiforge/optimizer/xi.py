"""
Spectral bound for positive trace-preserving maps on d levels:
Tr Phi <= d * min Re spec(Phi) + d^2 - d, where Phi is read as the transfer
matrix acting on vectorized operators. xi(C) = -Tr Phi + d min Re + d^2 - d
is negative exactly when the bound is violated.
"""

import logging
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.core.tensor_core import eig_general, reshuffle_adjoint
from choiforge.exceptions import InputError

logger = logging.getLogger(__name__)

DEGENERACY_GAP = 1e-9


@dataclass(frozen=True)
class BoundReport:
    """Terms of the spectral bound for one map"""

    trace: float
    min_real: float
    xi: float
    degenerate: bool

    @property
    def violated(self) -> bool:
        return self.xi < 0

    @property
    def verdict(self) -> str:
        return "VIOLATED" if self.violated else "SATISFIED"


def _square_dim(choi: ChoiMatrix) -> int:
    if choi.d_in != choi.d_out:
        raise InputError(
            f"The spectral bound needs d_in = d_out, got {choi.d_in} and {choi.d_out}"
        )
    return choi.d_in


def _spectrum(choi: ChoiMatrix):
    d = _square_dim(choi)
    transfer = choi.transfer_matrix()
    values, right, left = eig_general(transfer)
    degenerate = bool(np.any(np.abs(values[1:] - values[0]) < DEGENERACY_GAP))
    return d, transfer, values, right, left, degenerate


def bound_report(choi: ChoiMatrix) -> BoundReport:
    d, transfer, values, _, _, degenerate = _spectrum(choi)
    trace = float(np.trace(transfer).real)
    min_real = float(values[0].real)
    return BoundReport(trace, min_real, -trace + d * min_real + d * d - d, degenerate)


def xi(choi: ChoiMatrix) -> float:
    """Bound slack; negative means violated"""
    return bound_report(choi).xi


def xi_gradient(choi: ChoiMatrix) -> Tuple[float, np.ndarray, bool]:
    """
    Value and Hermitian gradient of xi with respect to C (dxi = Re Tr(G dC)).

    With u, v the left and right eigenvectors of the eigenvalue of minimal real
    part, d lambda = Tr(W dM) for W = v u^dag / (u^dag v). The gradient in
    transfer-matrix space is -I + d W, mapped back to Choi indices by the
    adjoint of the reshuffle.

    Returns:
        (xi, G, degenerate flag)
    """
    d, transfer, values, right, left, degenerate = _spectrum(choi)
    if degenerate:
        logger.info(
            "Minimal transfer eigenvalue is degenerate; using the first in sorted order",
            extra={"eigenvalue": complex(values[0])},
        )
    v = right[:, 0]
    u = left[:, 0]
    overlap = np.vdot(u, v)
    if abs(overlap) < 1e-14:
        logger.warning("Left and right eigenvectors are nearly orthogonal; xi gradient unstable")
        overlap = 1e-14
    w = np.outer(v, u.conj()) / overlap

    n = d * d
    k = -np.eye(n) + d * w
    g = reshuffle_adjoint(k, d, d)
    g = (g + g.conj().T) / 2

    trace = float(np.trace(transfer).real)
    value = -trace + d * float(values[0].real) + d * d - d
    return value, g, degenerate
