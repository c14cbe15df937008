"""
Adam updates over named real parameter arrays.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Tuple

import numpy as np

logger = logging.getLogger(__name__)


@dataclass
class AdamState:
    """Moment estimates and step counter"""

    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)
    t: int = 0


def adam_step(
    params: Dict[str, np.ndarray],
    grads: Dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    betas: Tuple[float, float] = (0.9, 0.999),
    eps: float = 1e-8,
    frozen: Optional[Dict[str, np.ndarray]] = None,
) -> Tuple[Dict[str, np.ndarray], AdamState]:
    """
    One bias-corrected Adam step.

    Args:
        params: Named parameter arrays (left untouched)
        grads: Gradients congruent to params
        state: Moments from the previous step
        lr: Learning rate
        betas: Decay rates of the first and second moments
        eps: Denominator offset
        frozen: Optional boolean arrays of slots that must not move

    Returns:
        (updated parameters, updated state)
    """
    beta1, beta2 = betas
    t = state.t + 1
    bc1 = 1.0 - beta1**t
    bc2 = 1.0 - beta2**t

    new_params: Dict[str, np.ndarray] = {}
    new_m: Dict[str, np.ndarray] = {}
    new_v: Dict[str, np.ndarray] = {}
    for name, value in params.items():
        g = np.asarray(grads[name], dtype=float)
        m = beta1 * state.m.get(name, np.zeros_like(g)) + (1.0 - beta1) * g
        v = beta2 * state.v.get(name, np.zeros_like(g)) + (1.0 - beta2) * (g * g)
        update = lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
        if frozen is not None and name in frozen:
            update = np.where(frozen[name], 0.0, update)
        new_params[name] = value - update
        new_m[name] = m
        new_v[name] = v
    return new_params, AdamState(new_m, new_v, t)


class Adam:
    """Stateful wrapper around adam_step"""

    def __init__(
        self, lr: float = 0.01, betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8
    ):
        self.lr = lr
        self.betas = betas
        self.eps = eps
        self.state = AdamState()

    def step(
        self,
        params: Dict[str, np.ndarray],
        grads: Dict[str, np.ndarray],
        frozen: Optional[Dict[str, np.ndarray]] = None,
    ) -> Dict[str, np.ndarray]:
        params, self.state = adam_step(
            params, grads, self.state, self.lr, self.betas, self.eps, frozen
        )
        return params
