"""
Mini-batch training with early stopping on validation accuracy
"""

import logging
import time
from typing import Any, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from ..config import TrainConfig
from ..errors import EmptyCorpusError
from .network import Network
from .optim import AdamState, adam_step, clip_by_global_norm

logger = logging.getLogger(__name__)


class EpochRecord(BaseModel):
    epoch: int
    loss: float
    validation_accuracy: float
    seconds: float


class TrainingHistory(BaseModel):
    """Per-epoch records plus where training stopped"""

    epochs: List[EpochRecord] = []
    best_epoch: int = 0
    best_validation_accuracy: float = 0.0
    stopped_early: bool = False


def accuracy(model: Network, examples: Sequence[Any], labels: np.ndarray) -> float:
    if len(examples) == 0:
        return 0.0
    return float(np.mean(model.predict(examples) == labels))


def train(model: Network, train_data: Sequence[Any], val_data: Sequence[Any],
          config: TrainConfig, name: str = "model",
          label_of=lambda example: example.label) -> Tuple[Network, TrainingHistory]:
    """Train a network with Adam, restoring the best-validation-accuracy weights

    Args:
        model (Network): Network to train in place
        train_data (list): Training examples
        val_data (list): Validation examples; when empty, training accuracy is monitored
        config (TrainConfig): Optimizer and early-stopping settings
        name (str): Name used in log messages
        label_of (callable): Extracts the integer label from an example

    Returns:
        tuple: (model with best weights loaded, TrainingHistory)
    """
    if not train_data:
        raise EmptyCorpusError(f"Cannot train {name}: empty training set")

    train_labels = np.array([label_of(e) for e in train_data], dtype=np.int64)
    monitor = val_data if len(val_data) else train_data
    monitor_labels = np.array([label_of(e) for e in monitor], dtype=np.int64)
    if not len(val_data):
        logger.warning("%s: no validation data, early stopping monitors training accuracy", name)

    rng = np.random.default_rng(config.dropout_seed)
    state = AdamState()
    history = TrainingHistory()
    best_state = model.state_dict()
    best_accuracy = -1.0
    stale = 0

    for epoch in range(1, config.max_epochs + 1):
        started = time.time()
        order = rng.permutation(len(train_data))
        losses = []
        for start in range(0, len(order), config.batch_size):
            batch_idx = order[start:start + config.batch_size]
            batch = [train_data[i] for i in batch_idx]
            loss = model.loss_and_grads(model.batch_inputs(batch), train_labels[batch_idx], training=True)
            grads = model.named_gradients()
            clip_by_global_norm(grads, config.clip_norm)
            adam_step(model.named_parameters(), grads, state, config)
            losses.append(loss * len(batch_idx))

        epoch_loss = float(np.sum(losses) / len(order))
        val_accuracy = accuracy(model, monitor, monitor_labels)
        history.epochs.append(EpochRecord(epoch=epoch, loss=epoch_loss,
                                          validation_accuracy=val_accuracy,
                                          seconds=time.time() - started))
        logger.debug("%s epoch %d: loss %.4f, validation accuracy %.4f", name, epoch, epoch_loss, val_accuracy)

        if val_accuracy > best_accuracy:
            best_accuracy = val_accuracy
            best_state = model.state_dict()
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                history.stopped_early = epoch < config.max_epochs
                logger.info("%s: early stop at epoch %d (best epoch %d, accuracy %.4f)",
                            name, epoch, history.best_epoch, best_accuracy)
                break

    model.load_state_dict(best_state)
    history.best_validation_accuracy = max(best_accuracy, 0.0)
    logger.info("%s: trained %d epochs, restored epoch %d (validation accuracy %.4f)",
                name, len(history.epochs), history.best_epoch, history.best_validation_accuracy)
    return model, history

