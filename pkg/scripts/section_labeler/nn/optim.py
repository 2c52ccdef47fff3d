"""
Adam with bias correction and global-norm gradient clipping
"""

from dataclasses import dataclass, field
from typing import Dict, Optional

import numpy as np

from ..config import TrainConfig
from ..errors import DimensionMismatchError, NonFiniteGradientError


@dataclass
class AdamState:
    """First/second moment estimates and the step counter"""

    step: int = 0
    m: Dict[str, np.ndarray] = field(default_factory=dict)
    v: Dict[str, np.ndarray] = field(default_factory=dict)


def global_norm(grads: Dict[str, np.ndarray]) -> float:
    return float(np.sqrt(sum(np.sum(np.square(g, dtype=np.float64)) for g in grads.values())))


def clip_by_global_norm(grads: Dict[str, np.ndarray], max_norm: Optional[float]) -> float:
    """Scale gradients in place so their global norm is at most ``max_norm``; returns the pre-clip norm"""
    norm = global_norm(grads)
    if max_norm is not None and norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


def adam_step(params: Dict[str, np.ndarray], grads: Dict[str, np.ndarray],
              state: AdamState, config: TrainConfig) -> AdamState:
    """Apply one Adam update to ``params`` in place

    Args:
        params (dict): Name -> parameter array (updated in place)
        grads (dict): Name -> gradient array of the same shape
        state (AdamState): Moments from previous steps
        config (TrainConfig): Learning rate, betas and epsilon

    Returns:
        AdamState: The advanced optimizer state

    Raises:
        NonFiniteGradientError: Naming the first tensor with a NaN or infinite gradient
    """
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradientError(f"Non-finite gradient in parameter '{name}'")
        if g.shape != params[name].shape:
            raise DimensionMismatchError(
                f"Gradient shape {g.shape} does not match parameter '{name}' {params[name].shape}")

    state.step += 1
    b1, b2 = config.beta1, config.beta2
    correction1 = 1.0 - b1 ** state.step
    correction2 = 1.0 - b2 ** state.step
    for name, g in grads.items():
        p = params[name]
        m = state.m.setdefault(name, np.zeros_like(p))
        v = state.v.setdefault(name, np.zeros_like(p))
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p -= (config.learning_rate * m_hat / (np.sqrt(v_hat) + config.epsilon)).astype(p.dtype)
    return state
