"""
Training losses built from certificate values.

main:  ReLU(eps + zeta_1) + gamma * ReLU(-zeta_k)
bound: ReLU(eps + zeta_1) + gamma * ReLU(delta - zeta_k) + omega * ReLU(nu + xi)

A hinge sitting exactly at zero counts as inactive.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from choiforge.choi.choi_matrix import ChoiMatrix
from choiforge.choi.params import tp_penalty
from choiforge.exceptions import InputError
from choiforge.optimizer.xi import xi_gradient
from choiforge.sdp.certificates import Certificate, CertificateEngine

logger = logging.getLogger(__name__)


class LossMode(Enum):
    """Loss variants"""

    MAIN = "main"
    BOUND = "bound"
    PPT_SQUARE = "ppt_square"
    DECOMPOSABLE_GEN = "decomposable_gen"


class LossConfig(BaseModel):
    """Loss hyperparameters"""

    epsilon: float = Field(default=0.05, gt=0, description="Non-decomposability margin")
    gamma: float = Field(default=2.0, gt=0, description="Weight of the positivity hinge")
    delta: float = Field(default=0.01, ge=0, description="Positivity margin in bound mode")
    omega: float = Field(default=1.0, ge=0, description="Weight of the spectral-bound hinge")
    nu: float = Field(default=0.01, ge=0, description="Spectral-bound margin")
    k: int = Field(default=2, ge=2, description="Extension level of the positivity certificate")
    mode: LossMode = Field(default=LossMode.MAIN, description="Loss variant")
    tp_penalty_weight: float = Field(
        default=1.0, ge=0, description="Weight of the soft trace-preservation penalty"
    )

    @model_validator(mode="after")
    def check_margins(self) -> "LossConfig":
        if self.mode is LossMode.BOUND and self.delta <= 0:
            raise ValueError("bound mode needs delta > 0")
        return self

    @property
    def positivity_margin(self) -> float:
        return self.delta if self.mode is LossMode.BOUND else 0.0


def relu(x: float) -> float:
    return x if x > 0 else 0.0


def main_loss_value(zeta1: float, zetak: float, cfg: LossConfig) -> float:
    return relu(cfg.epsilon + zeta1) + cfg.gamma * relu(-zetak)


def bound_loss_value(zeta1: float, zetak: float, xi_value: float, cfg: LossConfig) -> float:
    return (
        relu(cfg.epsilon + zeta1)
        + cfg.gamma * relu(cfg.delta - zetak)
        + cfg.omega * relu(cfg.nu + xi_value)
    )


@dataclass
class LossEvaluation:
    """Loss value together with everything the subgradient needs"""

    loss: float
    zeta1: Certificate
    zetak: Certificate
    xi: Optional[float] = None
    xi_grad: Optional[np.ndarray] = None
    xi_degenerate: bool = False
    tp_residual: Optional[float] = None
    tp_grad: Optional[np.ndarray] = None

    @property
    def failed(self) -> bool:
        return not (self.zeta1.ok and self.zetak.ok)

    @property
    def parts(self) -> Dict[str, float]:
        parts = {"zeta1": self.zeta1.value, "zetak": self.zetak.value}
        if self.xi is not None:
            parts["xi"] = self.xi
        if self.tp_residual is not None:
            parts["tp_residual"] = self.tp_residual
        return parts


def evaluate_loss(
    choi: ChoiMatrix,
    cfg: LossConfig,
    engine: CertificateEngine,
    tp_penalized: bool = False,
) -> LossEvaluation:
    """
    Solve both certificates for choi and combine them according to cfg.mode.
    A failed solve yields loss NaN and a failed evaluation.
    """
    if cfg.mode is LossMode.BOUND and choi.d_in != choi.d_out:
        raise InputError("Bound mode needs a map with d_in = d_out")

    cert1 = engine.zeta(choi, 1)
    if not cert1.ok:
        return LossEvaluation(float("nan"), cert1, cert1)
    certk = engine.zeta(choi, cfg.k)
    if not certk.ok:
        return LossEvaluation(float("nan"), cert1, certk)

    evaluation = LossEvaluation(0.0, cert1, certk)
    if cfg.mode is LossMode.BOUND:
        value, grad, degenerate = xi_gradient(choi)
        evaluation.xi, evaluation.xi_grad, evaluation.xi_degenerate = value, grad, degenerate
        evaluation.loss = bound_loss_value(cert1.value, certk.value, value, cfg)
    else:
        evaluation.loss = main_loss_value(cert1.value, certk.value, cfg)

    if tp_penalized:
        residual, grad = tp_penalty(choi)
        evaluation.tp_residual, evaluation.tp_grad = residual, grad
        evaluation.loss += cfg.tp_penalty_weight * residual
    return evaluation


def loss_main(
    choi: ChoiMatrix, cfg: LossConfig, engine: Optional[CertificateEngine] = None
) -> Tuple[float, Dict[str, float]]:
    """ReLU(eps + zeta_1) + gamma * ReLU(-zeta_k)"""
    main_cfg = cfg.model_copy(update={"mode": LossMode.MAIN})
    evaluation = evaluate_loss(choi, main_cfg, engine or CertificateEngine())
    return evaluation.loss, evaluation.parts


def loss_bound(
    choi: ChoiMatrix, cfg: LossConfig, engine: Optional[CertificateEngine] = None
) -> Tuple[float, Dict[str, float]]:
    """Main loss with margin delta plus omega * ReLU(nu + xi)"""
    bound_cfg = cfg.model_copy(update={"mode": LossMode.BOUND})
    evaluation = evaluate_loss(choi, bound_cfg, engine or CertificateEngine())
    return evaluation.loss, evaluation.parts
