"""
PPT maps and the PPT-square experiment.

A PPT map T2 is parametrized by a factor A with C = A A^dag (completely
positive by construction); a hinge on the negative eigenvalues of C^{T_B}
drives it towards complete copositivity. The experiment jointly trains a
positive map T1 and a PPT map T2 to make T1 o T2 non-decomposable. The
conjecture under test predicts that no run succeeds, so a run that does is
flagged for review rather than treated as an error.
"""

import logging
import time
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from choiforge.choi.choi_matrix import ChoiMatrix, compose_choi
from choiforge.choi.params import build_choi, fold_gradient, init_params
from choiforge.core.tensor_core import (
    HermitianOperator,
    eigh,
    partial_transpose,
    reshuffle_adjoint,
    reshuffle_gradient,
)
from choiforge.exceptions import DimensionError
from choiforge.optimizer.adam import AdamState, adam_step
from choiforge.optimizer.losses import LossConfig, relu
from choiforge.optimizer.records import EpochRow, RunOutcome, RunRecord
from choiforge.optimizer.train import TrainConfig
from choiforge.sdp.certificates import CertificateEngine
from choiforge.sdp.conic import SolverOptions

logger = logging.getLogger(__name__)

PENALTY_TOLERANCE = 1e-7


@dataclass(frozen=True)
class PptMapSpec:
    """Factor A of C = A A^dag for a map from d_in to d_out levels"""

    a_re: np.ndarray
    a_im: np.ndarray
    d_in: int
    d_out: int

    def __post_init__(self):
        n = self.d_in * self.d_out
        if self.a_re.shape != self.a_im.shape or self.a_re.shape[0] != n:
            raise DimensionError(
                f"Factor of shape {self.a_re.shape} does not fit d_in={self.d_in}, d_out={self.d_out}"
            )

    @property
    def factor(self) -> np.ndarray:
        return self.a_re + 1j * self.a_im

    @classmethod
    def from_factor(cls, a: np.ndarray, d_in: int, d_out: int) -> "PptMapSpec":
        a = np.asarray(a, dtype=np.complex128)
        if a.ndim == 1:
            a = a[:, None]
        return cls(a.real.copy(), a.imag.copy(), d_in, d_out)


def ppt_choi(spec: PptMapSpec) -> ChoiMatrix:
    a = spec.factor
    return ChoiMatrix(spec.d_in, spec.d_out, HermitianOperator(a @ a.conj().T))


def ppt_penalty_with_gradient(spec: PptMapSpec) -> Tuple[float, np.ndarray]:
    """
    Sum of max(0, -lambda_i(C^{T_B})) and its Hermitian gradient in C.
    """
    choi = ppt_choi(spec)
    values, vectors = eigh(choi.partial_transpose_output())
    negative = values < 0
    penalty = float(-values[negative].sum())
    if not negative.any():
        return penalty, np.zeros_like(choi.array)
    neg_vecs = vectors[:, negative]
    grad_pt = -neg_vecs @ neg_vecs.conj().T
    return penalty, partial_transpose(grad_pt, choi.dims, [1])


def ppt_penalty(spec: PptMapSpec) -> float:
    """Zero exactly when the map is PPT (CP and completely copositive)"""
    return ppt_penalty_with_gradient(spec)[0]


def _factor_gradient(spec: PptMapSpec, grad_c: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """dC = dA A^dag + A dA^dag gives dL/dA = 2 G A"""
    grad_a = 2.0 * grad_c @ spec.factor
    return grad_a.real, grad_a.imag


def _composition_gradients(
    outer: ChoiMatrix, inner: ChoiMatrix, grad_c: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Split a gradient on the Choi matrix of outer o inner into gradients on
    the two factors, through M = M_outer M_inner.
    """
    k = reshuffle_gradient(grad_c, inner.d_in, outer.d_out)
    k_outer = inner.transfer_matrix() @ k
    k_inner = k @ outer.transfer_matrix()
    g_outer = reshuffle_adjoint(k_outer, outer.d_in, outer.d_out)
    g_inner = reshuffle_adjoint(k_inner, inner.d_in, inner.d_out)
    return (g_outer + g_outer.conj().T) / 2, (g_inner + g_inner.conj().T) / 2


def ppt_square_run(
    train_cfg: TrainConfig,
    loss_cfg: LossConfig,
    small_dim: int = 2,
    large_dim: int = 4,
    penalty_weight: float = 10.0,
    solver_options: Optional[SolverOptions] = None,
    metrics=None,
) -> RunRecord:
    """
    Search for a positive T1: small -> large and a PPT T2: large -> small
    with T1 o T2 non-decomposable.

    Loss: ReLU(eps + zeta_1(C_{T1 o T2})) + gamma ReLU(-zeta_k(C_{T1}))
          + penalty_weight * pptPenalty(T2)

    Args:
        train_cfg: Optimizer settings
        loss_cfg: epsilon, gamma and k
        small_dim: Dimension of the intermediate system
        large_dim: Input dimension of T2 and output dimension of T1
        penalty_weight: Weight of the PPT hinge
        solver_options: Solver settings
        metrics: Optional RunMetrics

    Returns:
        RunRecord whose final_choi is the composition of the last recorded
        epoch; metadata carries its zeta_1, the penalty and whether a
        violation was found
    """
    engine = CertificateEngine(solver_options, metrics=metrics)
    rng = np.random.default_rng(train_cfg.seed)
    t1 = init_params(small_dim, large_dim, rng, tp=False, scale=train_cfg.init_scale)
    n2 = large_dim * small_dim
    scale = train_cfg.init_scale or 1.0 / n2
    t2 = PptMapSpec(
        rng.normal(0, scale, (n2, n2)), rng.normal(0, scale, (n2, n2)), large_dim, small_dim
    )

    state = AdamState()
    frozen = {"x": t1.structural_zero()}
    rows = []
    outcome = RunOutcome.EXHAUSTED
    success_epoch = None
    last = None
    evaluated = None
    start = time.perf_counter()
    for epoch in range(1, train_cfg.max_epochs + 1):
        c1 = build_choi(t1)
        c2 = ppt_choi(t2)
        composed = compose_choi(c1, c2)
        cert1 = engine.zeta(composed, 1)
        certk = engine.zeta(c1, loss_cfg.k) if cert1.ok else cert1
        if not (cert1.ok and certk.ok):
            outcome = RunOutcome.SOLVER_FAILED
            logger.warning(f"PPT-square run seed={train_cfg.seed} aborted at epoch {epoch}")
            break
        penalty, penalty_grad = ppt_penalty_with_gradient(t2)
        loss = (
            relu(loss_cfg.epsilon + cert1.value)
            + loss_cfg.gamma * relu(-certk.value)
            + penalty_weight * penalty
        )
        last = (cert1.value, certk.value, penalty)
        evaluated = composed
        rows.append(EpochRow(epoch, loss, cert1.value, certk.value, wall_s=time.perf_counter() - start))
        if metrics is not None:
            metrics.record_epoch()
        if loss <= 0:
            outcome = RunOutcome.SUCCESS
            success_epoch = epoch
            break

        grad_comp = np.zeros_like(composed.array)
        if loss_cfg.epsilon + cert1.value > 0:
            grad_comp = cert1.witness.matrix
        g1, g2 = _composition_gradients(c1, c2, grad_comp)
        if -certk.value > 0:
            g1 = g1 - loss_cfg.gamma * certk.witness.matrix
        g2 = g2 + penalty_weight * penalty_grad
        a_re, a_im = _factor_gradient(t2, g2)

        new, state = adam_step(
            {"x": t1.x, "a_re": t2.a_re, "a_im": t2.a_im},
            {"x": fold_gradient(t1, g1), "a_re": a_re, "a_im": a_im},
            state,
            train_cfg.learning_rate,
            train_cfg.adam_betas,
            train_cfg.adam_eps,
            frozen,
        )
        t1 = t1.with_x(new["x"])
        t2 = PptMapSpec(new["a_re"], new["a_im"], large_dim, small_dim)

    metadata = {
        "experiment": "pptsq",
        "small_dim": small_dim,
        "large_dim": large_dim,
        "penalty_weight": penalty_weight,
        "loss": loss_cfg.model_dump(mode="json"),
        "train": train_cfg.model_dump(mode="json"),
    }
    if last is not None:
        zeta1_final, zetak_final, penalty_final = last
        violation = bool(
            zeta1_final < -engine.options.cert_tol
            and penalty_final <= PENALTY_TOLERANCE
            and zetak_final >= -engine.options.cert_tol
        )
        metadata.update(
            {
                "final_zeta1": zeta1_final,
                "final_zetak_t1": zetak_final,
                "final_ppt_penalty": penalty_final,
                "violation": violation,
            }
        )
        if violation:
            logger.warning(
                f"PPT-square run seed={train_cfg.seed} produced a non-decomposable composition; "
                "flagged for manual review",
                extra={"zeta1": zeta1_final, "penalty": penalty_final},
            )
    if metrics is not None:
        metrics.record_outcome(outcome.value)
    return RunRecord(
        rows=rows,
        outcome=outcome,
        success_epoch=success_epoch,
        final_choi=evaluated,
        seed=train_cfg.seed,
        metadata=metadata,
    )
