"""
Training loop over parametrized Choi matrices.
Each epoch builds C from the parameters, solves both certificates, records the
loss, stops on zero loss and otherwise takes one Adam step along the
subgradient. Epochs are numbered from 1 and the success check runs before the
update.
"""

import logging
import time
from typing import Callable, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field

from choiforge.choi.params import ChoiParams, TpMode, build_choi, init_params
from choiforge.optimizer.adam import AdamState, adam_step
from choiforge.optimizer.losses import LossConfig, LossEvaluation, LossMode, evaluate_loss
from choiforge.optimizer.records import EpochRow, RunOutcome, RunRecord
from choiforge.optimizer.subgradient import subgradient
from choiforge.sdp.certificates import CertificateEngine
from choiforge.sdp.conic import SolverOptions

logger = logging.getLogger(__name__)


class TrainConfig(BaseModel):
    """Optimizer settings for one run"""

    learning_rate: float = Field(default=0.01, gt=0, description="Adam step size")
    max_epochs: int = Field(default=2000, ge=1, description="Epoch budget")
    seed: int = Field(default=0, ge=0, lt=2**64, description="Random seed")
    adam_betas: Tuple[float, float] = Field(default=(0.9, 0.999), description="Adam decay rates")
    adam_eps: float = Field(default=1e-8, gt=0, description="Adam denominator offset")
    init_scale: Optional[float] = Field(
        default=None, gt=0, description="Initial parameter std; 1/(d*d') when unset"
    )


def random_init(
    d_in: int,
    d_out: int,
    train_cfg: TrainConfig,
    mask: Optional[np.ndarray] = None,
    tp: bool = True,
    real: bool = False,
    tp_mode: TpMode = TpMode.EXACT,
) -> ChoiParams:
    """Seeded Gaussian starting point"""
    rng = np.random.default_rng(train_cfg.seed)
    return init_params(
        d_in, d_out, rng, mask=mask, tp=tp, real=real, tp_mode=tp_mode, scale=train_cfg.init_scale
    )


def _row(epoch: int, evaluation: LossEvaluation, start: float) -> EpochRow:
    return EpochRow(
        epoch=epoch,
        loss=evaluation.loss,
        zeta1=evaluation.zeta1.value,
        zetak=evaluation.zetak.value,
        xi=evaluation.xi if evaluation.xi is not None else float("nan"),
        wall_s=time.perf_counter() - start,
    )


def classify_bound_result(zeta1: float, cert_tol: float) -> str:
    """Bound-mode finds are non-decomposable or decomposable violators"""
    return "non_decomposable" if zeta1 < -cert_tol else "decomposable_violator"


def train_loop(
    init: ChoiParams,
    loss_cfg: LossConfig,
    train_cfg: TrainConfig,
    engine: Optional[CertificateEngine] = None,
    solver_options: Optional[SolverOptions] = None,
    metrics=None,
    on_epoch: Optional[Callable[[EpochRow], None]] = None,
) -> RunRecord:
    """
    Minimize the configured loss from init with Adam.

    Args:
        init: Starting parameters (flags and mask travel with them)
        loss_cfg: Loss hyperparameters
        train_cfg: Optimizer settings
        engine: Certificate engine; one is created from solver_options otherwise
        solver_options: Solver settings for a fresh engine
        metrics: Optional RunMetrics
        on_epoch: Callback receiving every recorded row

    Returns:
        RunRecord with outcome SUCCESS, EXHAUSTED or SOLVER_FAILED
    """
    engine = engine or CertificateEngine(solver_options, metrics=metrics)
    penalized = init.tp and init.tp_mode is TpMode.PENALTY
    frozen = {"x": init.structural_zero()}

    params = init
    state = AdamState()
    rows = []
    outcome = RunOutcome.EXHAUSTED
    success_epoch = None
    choi = None
    last: Optional[LossEvaluation] = None
    start = time.perf_counter()

    for epoch in range(1, train_cfg.max_epochs + 1):
        choi = build_choi(params)
        evaluation = evaluate_loss(choi, loss_cfg, engine, tp_penalized=penalized)
        if evaluation.failed:
            outcome = RunOutcome.SOLVER_FAILED
            logger.warning(f"Run seed={train_cfg.seed} aborted at epoch {epoch}: solver failure")
            break
        last = evaluation
        row = _row(epoch, evaluation, start)
        rows.append(row)
        if on_epoch is not None:
            on_epoch(row)
        if metrics is not None:
            metrics.record_epoch()

        if evaluation.loss <= 0:
            outcome = RunOutcome.SUCCESS
            success_epoch = epoch
            break

        grad = subgradient(params, loss_cfg, evaluation)
        new, state = adam_step(
            {"x": params.x},
            {"x": grad},
            state,
            train_cfg.learning_rate,
            train_cfg.adam_betas,
            train_cfg.adam_eps,
            frozen,
        )
        params = params.with_x(new["x"])

    metadata = {
        "d_in": init.d_in,
        "d_out": init.d_out,
        "tp": init.tp,
        "tp_mode": init.tp_mode.value,
        "real": init.real,
        "masked": init.mask is not None,
        "loss": loss_cfg.model_dump(mode="json"),
        "train": train_cfg.model_dump(mode="json"),
        "extend_side": engine.options.extend_side.value,
    }
    if last is not None and last.zetak.ok:
        metadata["extend_side_used"] = last.zetak.extend_side.value
    if loss_cfg.mode is LossMode.BOUND and outcome is RunOutcome.SUCCESS:
        metadata["classification"] = classify_bound_result(
            last.zeta1.value, engine.options.cert_tol
        )

    logger.info(
        f"Run seed={train_cfg.seed} finished: {outcome.value}",
        extra={"outcome": outcome.value, "epochs": len(rows), "success_epoch": success_epoch},
    )
    if metrics is not None:
        metrics.record_outcome(outcome.value)
    return RunRecord(
        rows=rows,
        outcome=outcome,
        success_epoch=success_epoch,
        final_choi=choi,
        seed=train_cfg.seed,
        metadata=metadata,
    )
