"""
Trainable parametrization of Choi matrices.
A real tensor X_{ijkl} (stored as a (d*d') x (d*d') matrix) generates
Re C = (X + X^T)/2 and Im C = (X - X^T)/2, so C is Hermitian for every X.
Masks zero parameters before symmetrization and trace preservation is
enforced by solving one diagonal slot per block.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.choi.masks import validate_mask
from choiforge.core.tensor_core import HermitianOperator, SubsystemDims, partial_trace
from choiforge.exceptions import InputError

logger = logging.getLogger(__name__)


class TpMode(Enum):
    """How trace preservation is imposed"""

    EXACT = "exact"  # dependent slot elimination
    PENALTY = "penalty"  # soft Frobenius penalty in the loss


@dataclass(frozen=True)
class ChoiParams:
    """
    Parameter tensor X with its structural flags.

    Attributes:
        d_in: Input dimension d
        d_out: Output dimension d'
        x: Real (d*d') x (d*d') array; entry [(i,j),(k,l)] is X_{ijkl}
        mask: Optional boolean mask over Choi entries
        tp: Trace-preserving constraint
        real: Real Choi matrix (X shared with its transpose)
        tp_mode: Elimination or penalty when tp is set
    """

    d_in: int
    d_out: int
    x: np.ndarray
    mask: Optional[np.ndarray] = None
    tp: bool = False
    real: bool = False
    tp_mode: TpMode = TpMode.EXACT
    _dependent: Dict[Tuple[int, int], int] = field(
        default_factory=dict, init=False, compare=False, repr=False
    )

    def __post_init__(self):
        n = self.d_in * self.d_out
        x = np.array(self.x, dtype=float)
        if x.shape != (n, n):
            raise InputError(f"Parameter tensor of shape {x.shape}, expected {(n, n)}")
        if not np.all(np.isfinite(x)):
            raise InputError("Parameter tensor has non-finite entries")
        x.setflags(write=False)
        object.__setattr__(self, "x", x)
        if self.mask is not None:
            object.__setattr__(self, "mask", validate_mask(self.mask, self.d_in, self.d_out))
        object.__setattr__(self, "_dependent", self._dependent_slots())

    @property
    def dims(self) -> SubsystemDims:
        return SubsystemDims((self.d_in, self.d_out))

    @property
    def eliminates_tp(self) -> bool:
        return self.tp and self.tp_mode is TpMode.EXACT

    def _flat(self, i: int, j: int) -> int:
        return i * self.d_out + j

    def _dependent_slots(self) -> Dict[Tuple[int, int], int]:
        """
        Dependent output slot j for each block (i, k).
        The last output level unless masked, then the largest unmasked one.
        Blocks with i != k and every diagonal slot masked need no slot.
        """
        if not self.eliminates_tp:
            return {}
        slots = {}
        for i in range(self.d_in):
            for k in range(self.d_in):
                free = [
                    j
                    for j in range(self.d_out)
                    if self.mask is None or self.mask[self._flat(i, j), self._flat(k, j)]
                ]
                if free:
                    slots[(i, k)] = free[-1]
                elif i == k:
                    raise InputError(
                        f"Mask removes every diagonal slot of block ({i},{i}); "
                        "trace preservation cannot hold"
                    )
        return slots

    def structural_zero(self) -> np.ndarray:
        """Boolean array of slots that are not free parameters"""
        fixed = np.zeros(self.x.shape, dtype=bool)
        if self.mask is not None:
            fixed |= ~self.mask
        for (i, k), j in self._dependent.items():
            fixed[self._flat(i, j), self._flat(k, j)] = True
        return fixed

    def with_x(self, x: np.ndarray) -> "ChoiParams":
        return replace(self, x=x)


def _effective_x(params: ChoiParams) -> np.ndarray:
    x = np.array(params.x)
    if params.mask is not None:
        x[~params.mask] = 0.0
    for (i, k), dep in params._dependent.items():
        rest = sum(
            x[params._flat(i, j), params._flat(k, j)]
            for j in range(params.d_out)
            if j != dep
        )
        x[params._flat(i, dep), params._flat(k, dep)] = float(i == k) - rest
    return x


def build_choi(params: ChoiParams) -> ChoiMatrix:
    """
    Choi matrix generated by params.
    Masked entries are exactly zero; with exact TP the output trace is the
    identity up to rounding in the dependent-slot sum.
    """
    x = _effective_x(params)
    if params.real:
        matrix = ((x + x.T) / 2).astype(np.complex128)
    else:
        matrix = (x + x.T) / 2 + 1j * (x - x.T) / 2
    return ChoiMatrix(
        params.d_in,
        params.d_out,
        HermitianOperator(matrix),
        tp=params.eliminates_tp,
        real=params.real,
    )


def init_params(
    d_in: int,
    d_out: int,
    rng: np.random.Generator,
    mask: Optional[np.ndarray] = None,
    tp: bool = True,
    real: bool = False,
    tp_mode: TpMode = TpMode.EXACT,
    scale: Optional[float] = None,
) -> ChoiParams:
    """Gaussian initialization with standard deviation 1/(d*d') by default"""
    n = d_in * d_out
    std = scale if scale is not None else 1.0 / n
    x = rng.normal(0.0, std, size=(n, n))
    if real:
        x = (x + x.T) / 2
    params = ChoiParams(d_in, d_out, x, mask=mask, tp=tp, real=real, tp_mode=tp_mode)
    return params.with_x(np.where(params.structural_zero(), 0.0, params.x))


def fold_gradient(params: ChoiParams, grad_c: np.ndarray) -> np.ndarray:
    """
    Chain a Hermitian gradient dL/dC (dL = Re Tr(G dC)) to the parameter tensor.

    Args:
        params: Current parameters
        grad_c: Hermitian G of dimension d*d'

    Returns:
        Real gradient congruent to params.x, zero at masked and dependent slots
    """
    g = np.asarray(grad_c)
    if params.real:
        grad = g.real.copy()
    else:
        grad = g.real + g.imag
    for (i, k), dep in params._dependent.items():
        dep_flat = (params._flat(i, dep), params._flat(k, dep))
        dep_grad = grad[dep_flat]
        for j in range(params.d_out):
            if j != dep:
                grad[params._flat(i, j), params._flat(k, j)] -= dep_grad
        grad[dep_flat] = 0.0
    if params.mask is not None:
        grad[~params.mask] = 0.0
    return grad


def tp_penalty(choi: ChoiMatrix) -> Tuple[float, np.ndarray]:
    """
    Soft trace-preservation penalty ||Tr_out(C) - I||_F and its gradient
    (R (x) I)/||R||_F with R = Tr_out(C) - I.
    """
    residual = partial_trace(choi.array, choi.dims, [1]) - np.eye(choi.d_in)
    norm = float(np.linalg.norm(residual))
    if norm == 0.0:
        return 0.0, np.zeros_like(choi.array)
    return norm, np.kron(residual, np.eye(choi.d_out)) / norm
