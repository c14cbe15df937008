"""
Decomposable maps from trainable dilations.

A channel Gamma(rho) = Tr_anc[U (rho (x) |0><0|) U^dag] with U = exp(A - A^dag)
has Kraus operators K_j = (I (x) <j|) U (I (x) |0>). Mixing one channel with a
second one composed with the transposition gives
Phi = p Gamma_1 + (1 - p) Gamma_2 o T, positive and decomposable by
construction. Training pushes the minimal Choi eigenvalue below zero so the
result is not completely positive.
"""

import logging
import time
from dataclasses import dataclass
from typing import List, Optional, Tuple

import numpy as np

from choiforge.choi.choi_matrix import ChoiMatrix, choi_from_kraus, input_transpose
from choiforge.core.tensor_core import (
    HermitianOperator,
    eigh,
    matrix_exp,
    matrix_exp_derivative,
    partial_transpose,
)
from choiforge.exceptions import DimensionError, InputError
from choiforge.optimizer.adam import AdamState, adam_step
from choiforge.optimizer.records import EpochRow, RunOutcome, RunRecord
from choiforge.optimizer.train import TrainConfig

logger = logging.getLogger(__name__)

# lambda_min must fall strictly below -NON_CP_MARGIN for a run to count as non-CP
NON_CP_MARGIN = 1e-7


@dataclass(frozen=True)
class DilationParams:
    """Generator A of the dilation unitary on system (x) ancilla"""

    a_re: np.ndarray
    a_im: np.ndarray
    ancilla_dim: int

    def __post_init__(self):
        if self.a_re.shape != self.a_im.shape or self.a_re.ndim != 2:
            raise DimensionError("Dilation generator parts must be equal square arrays")
        if self.a_re.shape[0] != self.a_re.shape[1]:
            raise DimensionError(f"Dilation generator must be square, got {self.a_re.shape}")
        if self.a_re.shape[0] % self.ancilla_dim:
            raise DimensionError(
                f"Generator dim {self.a_re.shape[0]} is not a multiple of ancilla dim {self.ancilla_dim}"
            )
        if not (np.all(np.isfinite(self.a_re)) and np.all(np.isfinite(self.a_im))):
            raise InputError("Dilation generator has non-finite entries")

    @property
    def system_dim(self) -> int:
        return self.a_re.shape[0] // self.ancilla_dim

    @property
    def generator(self) -> np.ndarray:
        a = self.a_re + 1j * self.a_im
        return a - a.conj().T

    def unitary(self) -> np.ndarray:
        return matrix_exp(self.generator)

    @classmethod
    def zeros(cls, system_dim: int, ancilla_dim: int) -> "DilationParams":
        n = system_dim * ancilla_dim
        return cls(np.zeros((n, n)), np.zeros((n, n)), ancilla_dim)

    @classmethod
    def random(
        cls, system_dim: int, ancilla_dim: int, rng: np.random.Generator, scale: float = 1.0
    ) -> "DilationParams":
        n = system_dim * ancilla_dim
        return cls(rng.normal(0, scale, (n, n)), rng.normal(0, scale, (n, n)), ancilla_dim)


def kraus_from_dilation(params: DilationParams, system_dim: int) -> List[np.ndarray]:
    """K_j = (I (x) <j|) U (I (x) |0>) for j over the ancilla basis"""
    if params.system_dim != system_dim:
        raise DimensionError(
            f"Dilation acts on {params.system_dim} system levels, expected {system_dim}"
        )
    m = params.ancilla_dim
    u4 = params.unitary().reshape(system_dim, m, system_dim, m)
    return [u4[:, j, :, 0] for j in range(m)]


def dilation_channel(params: DilationParams, rho: np.ndarray) -> np.ndarray:
    """Tr_anc[U (rho (x) |0><0|) U^dag]"""
    d, m = params.system_dim, params.ancilla_dim
    ancilla = np.zeros((m, m))
    ancilla[0, 0] = 1.0
    u = params.unitary()
    joint = u @ np.kron(rho, ancilla) @ u.conj().T
    return np.einsum("ajbj->ab", joint.reshape(d, m, d, m))


@dataclass(frozen=True)
class DecomposableSpec:
    """
    Mixture weight and the two dilations.
    p = (1 + sin theta)/2 keeps p in [0, 1] for every theta.
    """

    theta: float
    dilation1: DilationParams
    dilation2: DilationParams

    @property
    def p(self) -> float:
        return (1.0 + np.sin(self.theta)) / 2.0

    @classmethod
    def from_p(cls, p: float, dilation1: DilationParams, dilation2: DilationParams) -> "DecomposableSpec":
        if not 0.0 <= p <= 1.0:
            raise InputError(f"Mixing weight must lie in [0, 1], got {p}")
        return cls(float(np.arcsin(2.0 * p - 1.0)), dilation1, dilation2)


def decomposable_choi(spec: DecomposableSpec) -> ChoiMatrix:
    """Choi matrix of p Gamma_1 + (1 - p) Gamma_2 o T"""
    d = spec.dilation1.system_dim
    c1 = choi_from_kraus(kraus_from_dilation(spec.dilation1, d))
    c2 = input_transpose(choi_from_kraus(kraus_from_dilation(spec.dilation2, d)))
    p = spec.p
    matrix = p * c1.array + (1.0 - p) * c2.array
    return ChoiMatrix(d, d, HermitianOperator(matrix), tp=True)


def _dilation_gradient(params: DilationParams, grad_c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """
    Chain a Hermitian gradient dL/dC of the channel's Choi matrix to A.

    Returns:
        (dL/d Re A, dL/d Im A)
    """
    d, m = params.system_dim, params.ancilla_dim
    b = params.generator
    u = matrix_exp(b)
    u4 = u.reshape(d, m, d, m)

    grad_u4 = np.zeros_like(u4)
    for j in range(m):
        vec = u4[:, j, :, 0].T.reshape(-1)
        h = (grad_c @ vec).reshape(d, d)
        grad_u4[:, j, :, 0] = 2.0 * h.T
    grad_u = grad_u4.reshape(d * m, d * m)

    # The adjoint of the exponential's derivative at B is its derivative at B^dag
    grad_b = matrix_exp_derivative(b.conj().T, grad_u)
    grad_a = grad_b - grad_b.conj().T
    return grad_a.real, grad_a.imag


def _min_eigen(choi: ChoiMatrix) -> Tuple[float, np.ndarray]:
    values, vectors = eigh(choi.array)
    return float(values[0]), vectors[:, 0]


def train_non_cp_decomposable(
    system_dim: int,
    train_cfg: TrainConfig,
    ancilla_dim: Optional[int] = None,
    metrics=None,
) -> Tuple[DecomposableSpec, RunRecord]:
    """
    Minimize ReLU(lambda_min(C) + NON_CP_MARGIN) over the dilations and the
    mixing angle.

    Args:
        system_dim: Dimension d of the map
        train_cfg: Optimizer settings (seed drives the initial point)
        ancilla_dim: Ancilla dimension, d when unset
        metrics: Optional RunMetrics

    Returns:
        (spec of the last recorded epoch, run record); success means
        lambda_min < -NON_CP_MARGIN, so the map is not CP
    """
    m = ancilla_dim or system_dim
    rng = np.random.default_rng(train_cfg.seed)
    scale = train_cfg.init_scale or 1.0 / (system_dim * m)
    spec = DecomposableSpec(
        float(rng.uniform(-np.pi / 2, np.pi / 2)),
        DilationParams.random(system_dim, m, rng, scale),
        DilationParams.random(system_dim, m, rng, scale),
    )

    state = AdamState()
    rows = []
    outcome = RunOutcome.EXHAUSTED
    success_epoch = None
    evaluated = spec
    lam = float("nan")
    start = time.perf_counter()
    for epoch in range(1, train_cfg.max_epochs + 1):
        c1 = choi_from_kraus(kraus_from_dilation(spec.dilation1, system_dim))
        c2 = choi_from_kraus(kraus_from_dilation(spec.dilation2, system_dim))
        choi = decomposable_choi(spec)
        lam, vec = _min_eigen(choi)
        evaluated = spec
        loss = max(lam + NON_CP_MARGIN, 0.0)
        rows.append(EpochRow(epoch, loss, float("nan"), float("nan"), wall_s=time.perf_counter() - start))
        if metrics is not None:
            metrics.record_epoch()
        if lam < -NON_CP_MARGIN:
            outcome = RunOutcome.SUCCESS
            success_epoch = epoch
            break

        g = np.outer(vec, vec.conj())
        p = spec.p
        c2t = input_transpose(c2).array
        grad_p = float(np.real(vec.conj() @ (c1.array - c2t) @ vec))
        g1_re, g1_im = _dilation_gradient(spec.dilation1, p * g)
        g2_re, g2_im = _dilation_gradient(
            spec.dilation2, (1.0 - p) * partial_transpose(g, (system_dim, system_dim), [0])
        )
        params = {
            "theta": np.array([spec.theta]),
            "a1_re": spec.dilation1.a_re,
            "a1_im": spec.dilation1.a_im,
            "a2_re": spec.dilation2.a_re,
            "a2_im": spec.dilation2.a_im,
        }
        grads = {
            "theta": np.array([grad_p * np.cos(spec.theta) / 2.0]),
            "a1_re": g1_re,
            "a1_im": g1_im,
            "a2_re": g2_re,
            "a2_im": g2_im,
        }
        new, state = adam_step(
            params, grads, state, train_cfg.learning_rate, train_cfg.adam_betas, train_cfg.adam_eps
        )
        spec = DecomposableSpec(
            float(new["theta"][0]),
            DilationParams(new["a1_re"], new["a1_im"], m),
            DilationParams(new["a2_re"], new["a2_im"], m),
        )

    logger.info(
        f"Decomposable generator seed={train_cfg.seed} finished: {outcome.value}",
        extra={"outcome": outcome.value, "epochs": len(rows)},
    )
    if metrics is not None:
        metrics.record_outcome(outcome.value)
    record = RunRecord(
        rows=rows,
        outcome=outcome,
        success_epoch=success_epoch,
        final_choi=decomposable_choi(evaluated),
        seed=train_cfg.seed,
        metadata={
            "experiment": "decomposable",
            "d_in": system_dim,
            "d_out": system_dim,
            "ancilla_dim": m,
            "p": evaluated.p,
            "lambda_min": lam,
            "non_cp_margin": NON_CP_MARGIN,
            "train": train_cfg.model_dump(mode="json"),
        },
    )
    return evaluated, record
