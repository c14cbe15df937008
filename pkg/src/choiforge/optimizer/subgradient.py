"""
Subgradients of the training losses.
Each certificate value is a minimum of functions linear in C, so its optimal
witness is a subgradient with respect to C. Hinge gradients are combined in
Choi space and then chained through the parametrization.
"""

import logging

import numpy as np

from choiforge.choi.params import ChoiParams, fold_gradient
from choiforge.exceptions import InputError
from choiforge.optimizer.losses import LossConfig, LossEvaluation, LossMode

logger = logging.getLogger(__name__)


def choi_gradient(evaluation: LossEvaluation, cfg: LossConfig) -> np.ndarray:
    """
    Hermitian gradient G of the loss with respect to C (dL = Re Tr(G dC)).

    Args:
        evaluation: Certificates and auxiliary terms at the current point
        cfg: Loss hyperparameters

    Returns:
        G with the dimension of the Choi matrix
    """
    if evaluation.failed:
        raise InputError("Cannot differentiate a failed loss evaluation")
    z1, zk = evaluation.zeta1, evaluation.zetak
    grad = np.zeros_like(z1.witness.matrix)
    if cfg.epsilon + z1.value > 0:
        grad = grad + z1.witness.matrix
    if cfg.positivity_margin - zk.value > 0:
        grad = grad - cfg.gamma * zk.witness.matrix
    if cfg.mode is LossMode.BOUND and evaluation.xi is not None:
        if cfg.nu + evaluation.xi > 0:
            grad = grad + cfg.omega * evaluation.xi_grad
    if evaluation.tp_grad is not None:
        grad = grad + cfg.tp_penalty_weight * evaluation.tp_grad
    return grad


def subgradient(
    params: ChoiParams, cfg: LossConfig, evaluation: LossEvaluation
) -> np.ndarray:
    """Loss subgradient with respect to the parameter tensor of params"""
    return fold_gradient(params, choi_gradient(evaluation, cfg))
