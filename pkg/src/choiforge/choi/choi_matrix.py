"""
Choi-matrix representation of linear maps.
A map Phi: B(C^d) -> B(C^d') is stored through C = sum_ik |i><k| (x) Phi(|i><k|),
flat index i*d' + j for input index i and output index j. Map application,
Kraus conversion, composition and the standard map constructors live here.
"""

import logging
from dataclasses import dataclass
from typing import Callable, List, Sequence

import numpy as np

from choiforge.core.tensor_core import (
    HermitianOperator,
    SubsystemDims,
    as_array,
    eigh,
    max_ent_vector,
    partial_trace,
    partial_transpose,
    reshuffle,
    unreshuffle,
)
from choiforge.exceptions import DimensionError, InputError

logger = logging.getLogger(__name__)

# Looser than build_choi's exact elimination so dilation-built channels qualify
TP_TOLERANCE = 1e-10


@dataclass(frozen=True)
class ChoiMatrix:
    """Choi matrix of a map from d_in to d_out levels"""

    d_in: int
    d_out: int
    matrix: HermitianOperator
    tp: bool = False
    real: bool = False

    def __post_init__(self):
        if not isinstance(self.matrix, HermitianOperator):
            object.__setattr__(self, "matrix", HermitianOperator(self.matrix))
        if self.d_in < 1 or self.d_out < 1:
            raise DimensionError(f"Map dimensions must be positive, got {self.d_in}, {self.d_out}")
        if self.matrix.dim != self.d_in * self.d_out:
            raise DimensionError(
                f"Choi matrix of dim {self.matrix.dim} does not match "
                f"d_in={self.d_in}, d_out={self.d_out}"
            )
        if self.tp and self.tp_residual() > TP_TOLERANCE:
            raise InputError(
                f"Choi matrix flagged trace preserving has residual {self.tp_residual():.3e}"
            )
        if self.real and np.max(np.abs(self.matrix.matrix.imag), initial=0.0) > 0:
            raise InputError("Choi matrix flagged real has non-zero imaginary entries")

    @property
    def dims(self) -> SubsystemDims:
        return SubsystemDims((self.d_in, self.d_out))

    @property
    def array(self) -> np.ndarray:
        return self.matrix.matrix

    def tp_residual(self) -> float:
        """Frobenius distance of Tr_out(C) from the identity"""
        reduced = partial_trace(self.array, self.dims, [1])
        return float(np.linalg.norm(reduced - np.eye(self.d_in)))

    def min_eigenvalue(self) -> float:
        return self.matrix.min_eigenvalue()

    def partial_transpose_output(self) -> np.ndarray:
        """C^{T_B}, transposed on the output subsystem"""
        return partial_transpose(self.array, self.dims, [1])

    def min_eigenvalue_pt(self) -> float:
        return float(eigh(self.partial_transpose_output())[0][0])

    def transfer_matrix(self) -> np.ndarray:
        return reshuffle(self.array, self.d_in, self.d_out)

    def swap_subsystems(self) -> "ChoiMatrix":
        """Same operator with the tensor factors exchanged (dims become (d_out, d_in))"""
        c4 = self.array.reshape(self.d_in, self.d_out, self.d_in, self.d_out)
        swapped = c4.transpose(1, 0, 3, 2).reshape(self.array.shape)
        return ChoiMatrix(self.d_out, self.d_in, HermitianOperator(swapped))

    def scaled(self, alpha: float) -> "ChoiMatrix":
        return ChoiMatrix(self.d_in, self.d_out, self.matrix * alpha)


def from_array(matrix: np.ndarray, d_in: int, d_out: int, tp: bool = False) -> ChoiMatrix:
    """Wrap a dense array as a ChoiMatrix"""
    return ChoiMatrix(d_in, d_out, HermitianOperator(matrix), tp=tp)


def apply_map(choi: ChoiMatrix, rho: np.ndarray) -> np.ndarray:
    """
    Action of the map on an operator: Phi(rho) = Tr_1[(rho^T (x) I) C].

    Args:
        choi: Choi matrix of the map
        rho: d_in x d_in operator

    Returns:
        d_out x d_out output operator
    """
    r = as_array(rho)
    if r.shape != (choi.d_in, choi.d_in):
        raise DimensionError(f"Input of shape {r.shape} does not match d_in={choi.d_in}")
    c4 = choi.array.reshape(choi.d_in, choi.d_out, choi.d_in, choi.d_out)
    return np.einsum("ki,kaib->ab", r, c4)


def choi_from_action(
    action: Callable[[np.ndarray], np.ndarray], d_in: int, d_out: int
) -> ChoiMatrix:
    """Choi matrix of a map given as a callable on d_in x d_in matrices"""
    c = np.zeros((d_in * d_out, d_in * d_out), dtype=np.complex128)
    for i in range(d_in):
        for k in range(d_in):
            unit = np.zeros((d_in, d_in), dtype=np.complex128)
            unit[i, k] = 1.0
            out = np.asarray(action(unit))
            if out.shape != (d_out, d_out):
                raise DimensionError(f"Map output of shape {out.shape}, expected {(d_out, d_out)}")
            c[i * d_out:(i + 1) * d_out, k * d_out:(k + 1) * d_out] = out
    return from_array(c, d_in, d_out)


def choi_from_kraus(kraus: Sequence[np.ndarray]) -> ChoiMatrix:
    """
    Choi matrix sum_l (I (x) E_l)|psi><psi|(I (x) E_l)^dag of a Kraus set.
    Every operator must be d_out x d_in.
    """
    ops: List[np.ndarray] = [np.asarray(k, dtype=np.complex128) for k in kraus]
    if not ops:
        raise InputError("Kraus set is empty")
    d_out, d_in = ops[0].shape
    if any(k.shape != (d_out, d_in) for k in ops):
        raise DimensionError(f"Kraus operators disagree in shape: {[k.shape for k in ops]}")

    vectors = np.stack([k.T.reshape(-1) for k in ops], axis=1)
    c = vectors @ vectors.conj().T
    completeness = sum(k.conj().T @ k for k in ops)
    tp = bool(np.linalg.norm(completeness - np.eye(d_in)) <= TP_TOLERANCE)
    return ChoiMatrix(d_in, d_out, HermitianOperator(c), tp=tp)


def apply_kraus(kraus: Sequence[np.ndarray], rho: np.ndarray) -> np.ndarray:
    """Direct Kraus action sum_l E_l rho E_l^dag"""
    return sum(k @ rho @ k.conj().T for k in kraus)


def compose_choi(outer: ChoiMatrix, inner: ChoiMatrix) -> ChoiMatrix:
    """
    Choi matrix of outer o inner (inner applied first).
    Composition is a product of transfer matrices.
    """
    if inner.d_out != outer.d_in:
        raise DimensionError(
            f"Cannot compose: inner map outputs {inner.d_out} levels, outer expects {outer.d_in}"
        )
    transfer = outer.transfer_matrix() @ inner.transfer_matrix()
    c = unreshuffle(transfer, inner.d_in, outer.d_out)
    return from_array(c, inner.d_in, outer.d_out)


def input_transpose(choi: ChoiMatrix) -> ChoiMatrix:
    """Choi matrix of Phi o T: partial transpose on the input subsystem"""
    c = partial_transpose(choi.array, choi.dims, [0])
    return ChoiMatrix(choi.d_in, choi.d_out, HermitianOperator(c), tp=choi.tp)


def identity_choi(d: int) -> ChoiMatrix:
    """|psi><psi| for the unnormalized maximally entangled vector"""
    psi = max_ent_vector(d)
    return ChoiMatrix(d, d, HermitianOperator(np.outer(psi, psi.conj())), tp=True)


def transposition_choi(d: int) -> ChoiMatrix:
    """SWAP operator, the Choi matrix of rho -> rho^T"""
    swap = np.eye(d * d).reshape(d, d, d, d).transpose(0, 1, 3, 2).reshape(d * d, d * d)
    return ChoiMatrix(d, d, HermitianOperator(swap), tp=True)


def depolarizing_choi(d_in: int, d_out: int) -> ChoiMatrix:
    """Completely depolarizing channel rho -> Tr(rho) I / d_out"""
    n = d_in * d_out
    return ChoiMatrix(d_in, d_out, HermitianOperator(np.eye(n) / d_out), tp=True)


def choi_map_family(a: float, b: float, c: float) -> ChoiMatrix:
    """
    Generalized Choi map on 3 levels:
    X -> diag(a x11 + b x22 + c x33, c x11 + a x22 + b x33, b x11 + c x22 + a x33) - X.
    (2, 0, 1) is Choi's original positive non-decomposable map.
    """
    weights = np.array([[a, b, c], [c, a, b], [b, c, a]], dtype=float)

    def action(x: np.ndarray) -> np.ndarray:
        return np.diag(weights @ np.diag(x)) - x

    return choi_from_action(action, 3, 3)
