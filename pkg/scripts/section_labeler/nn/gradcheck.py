"""
Finite-difference verification of the analytic gradients
"""

import logging
from typing import Any, Dict, Sequence

import numpy as np

from ..utils.text_processing import PAD_ID
from .network import Network

logger = logging.getLogger(__name__)


def grad_check(model: Network, sample: Sequence[Any], epsilon: float = 1e-5,
               entries_per_param: int = 8, seed: int = 0, targets=None) -> float:
    """Compare backpropagated gradients with central differences

    The check runs on a float64 copy with dropout disabled, probing a random
    subset of entries from every trainable tensor.

    Args:
        model (Network): Network to check (left untouched)
        sample (list): Examples forming one batch
        epsilon (float): Central-difference step
        entries_per_param (int): Entries probed per parameter tensor
        seed (int): Seed choosing the probed entries
        targets (array, optional): Labels; defaults to each example's ``label``

    Returns:
        float: max |analytic - numeric| / max(|analytic|, |numeric|, 1e-8)
    """
    checked = model.astype(np.float64)
    inputs = checked.batch_inputs(list(sample))
    if targets is None:
        targets = np.array([example.label for example in sample], dtype=np.int64)

    checked.loss_and_grads(inputs, targets, training=False)
    analytic: Dict[str, np.ndarray] = {name: g.copy() for name, g in checked.named_gradients().items()}
    params = checked.named_parameters()
    rng = np.random.default_rng(seed)

    worst = 0.0
    worst_name = None
    for name, value in params.items():
        flat = value.reshape(-1)
        candidates = np.arange(flat.size)
        if name.endswith(".E"):
            # the PAD row is pinned to zero and never trained
            candidates = candidates[candidates // value.shape[1] != PAD_ID]
        count = min(entries_per_param, candidates.size)
        for idx in rng.choice(candidates, size=count, replace=False):
            original = flat[idx]
            flat[idx] = original + epsilon
            loss_plus = checked.loss_and_grads(inputs, targets, training=False)
            flat[idx] = original - epsilon
            loss_minus = checked.loss_and_grads(inputs, targets, training=False)
            flat[idx] = original
            numeric = (loss_plus - loss_minus) / (2.0 * epsilon)
            exact = analytic[name].reshape(-1)[idx]
            error = abs(exact - numeric) / max(abs(exact), abs(numeric), 1e-8)
            if error > worst:
                worst, worst_name = error, name
    logger.info("Gradient check: max relative error %.3e (%s)", worst, worst_name)
    return float(worst)
