"""
One-versus-rest logistic-regression stacker over the base models' probabilities

Each of the seven binary classifiers scores sigmoid(w_k . x + b_k) on the
21-dim concatenation of the focus, surrounding and layout probability
vectors. Fitting is deterministic full-batch gradient descent on the mean
logistic loss plus an L2 penalty on the weights; fine-tuning resumes the
same descent from the current weights on new data.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from .config import StackerConfig
from .core_types import NUM_LABELS, SectionLabel, ScoreVector
from .errors import DegenerateDataError, DimensionMismatchError, EmptyCorpusError

logger = logging.getLogger(__name__)

BLOCKS = ("focus", "surrounding", "layout")
STACKING_WIDTH = NUM_LABELS * len(BLOCKS)


class StackingInput(BaseModel):
    """The three base ProbVectors of one sentence, concatenated in BLOCKS order"""

    model_config = ConfigDict(frozen=True)

    x: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_blocks(self) -> "StackingInput":
        if len(self.x) != STACKING_WIDTH:
            raise ValueError(f"StackingInput needs {STACKING_WIDTH} entries, got {len(self.x)}")
        values = np.asarray(self.x)
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise ValueError("StackingInput entries must lie in [0, 1]")
        sums = values.reshape(len(BLOCKS), NUM_LABELS).sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ValueError(f"Each probability block must sum to 1, got {sums.tolist()}")
        return self

    @classmethod
    def from_blocks(cls, focus, surrounding, layout) -> "StackingInput":
        return cls(x=tuple(float(v) for v in np.concatenate([focus, surrounding, layout])))


def stack_probabilities(focus: np.ndarray, surrounding: np.ndarray, layout: np.ndarray) -> np.ndarray:
    """Concatenate [N, 7] probability matrices into [N, 21] stacking inputs"""
    blocks = [np.asarray(block, dtype=np.float64) for block in (focus, surrounding, layout)]
    shapes = {block.shape for block in blocks}
    if len(shapes) != 1 or blocks[0].ndim != 2 or blocks[0].shape[1] != NUM_LABELS:
        raise DimensionMismatchError(f"Stacking needs three [N, {NUM_LABELS}] blocks, got {[b.shape for b in blocks]}")
    return np.concatenate(blocks, axis=1)


@dataclass
class StackerModel:
    """Seven one-vs-rest logistic regressions sharing a 21-dim input"""

    weights: np.ndarray = field(default_factory=lambda: np.zeros((NUM_LABELS, STACKING_WIDTH)))
    bias: np.ndarray = field(default_factory=lambda: np.zeros(NUM_LABELS))
    fine_tuned: bool = False
    dataset_id: Optional[str] = None
    iterations: int = 0

    def scores(self, inputs: np.ndarray) -> np.ndarray:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
        if inputs.shape[1] != STACKING_WIDTH:
            raise DimensionMismatchError(f"Stacker expects {STACKING_WIDTH} inputs, got {inputs.shape[1]}")
        return _sigmoid(inputs @ self.weights.T + self.bias)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        # argmax keeps the first maximum, i.e. the lowest label code
        return np.argmax(self.scores(inputs), axis=1)

    def copy(self) -> "StackerModel":
        return StackerModel(self.weights.copy(), self.bias.copy(), self.fine_tuned, self.dataset_id, self.iterations)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_training_set(inputs: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    inputs = np.atleast_2d(np.asarray(inputs, dtype=np.float64))
    labels = np.asarray(labels, dtype=np.int64)
    if inputs.size == 0 or len(labels) == 0:
        raise EmptyCorpusError("empty stacking set")
    if inputs.shape != (len(labels), STACKING_WIDTH):
        raise DimensionMismatchError(
            f"Stacking inputs {inputs.shape} do not match {len(labels)} labels x {STACKING_WIDTH}")
    if len(np.unique(labels)) < 2:
        raise DegenerateDataError("degenerate stacking set")
    return inputs, labels


def _descend(model: StackerModel, inputs: np.ndarray, labels: np.ndarray, config: StackerConfig) -> StackerModel:
    """Full-batch gradient descent, each class stopping at its own gradient tolerance"""
    targets = (labels[:, None] == np.arange(NUM_LABELS)[None, :]).astype(np.float64)
    n = len(labels)
    active = np.ones(NUM_LABELS, dtype=bool)
    iteration = 0
    for iteration in range(1, config.max_iterations + 1):
        residual = _sigmoid(inputs @ model.weights.T + model.bias) - targets
        grad_w = residual.T @ inputs / n + config.l2 * model.weights
        grad_b = residual.mean(axis=0)
        norms = np.sqrt(np.sum(grad_w ** 2, axis=1) + grad_b ** 2)
        active &= norms >= config.tolerance
        if not active.any():
            break
        model.weights[active] -= config.learning_rate * grad_w[active]
        model.bias[active] -= config.learning_rate * grad_b[active]
    model.iterations += iteration
    if active.any():
        logger.info("Stacker: %d classes hit the iteration cap of %d", int(active.sum()), config.max_iterations)
    return model


def fit_stacker(holdout_inputs: np.ndarray, labels: Sequence[int],
                config: Optional[StackerConfig] = None) -> StackerModel:
    """Fit the stacker on held-out base-model probabilities

    Args:
        holdout_inputs (array): [N, 21] stacking inputs
        labels (list): Gold label codes, one per row
        config (StackerConfig, optional): Optimizer settings

    Returns:
        StackerModel: The fitted meta-classifier

    Raises:
        EmptyCorpusError: If there are no rows
        DegenerateDataError: If fewer than two classes are present
    """
    config = config or StackerConfig()
    inputs, labels = _check_training_set(holdout_inputs, labels)
    model = _descend(StackerModel(), inputs, labels, config)
    logger.info("Stacker fitted on %d rows in %d iterations", len(labels), model.iterations)
    return model


def finetune_stacker(model: StackerModel, new_inputs: np.ndarray, labels: Sequence[int],
                     config: Optional[StackerConfig] = None, dataset_id: Optional[str] = None) -> StackerModel:
    """Continue fitting a copy of the stacker on target-domain rows only"""
    config = config or StackerConfig()
    inputs, labels = _check_training_set(new_inputs, labels)
    tuned = _descend(model.copy(), inputs, labels, config)
    tuned.fine_tuned = True
    tuned.dataset_id = dataset_id
    logger.info("Stacker fine-tuned on %d rows%s", len(labels), f" ({dataset_id})" if dataset_id else "")
    return tuned


def predict_stacker(model: StackerModel, stacking_input) -> Tuple[SectionLabel, ScoreVector]:
    """Label one sentence; ties go to the lowest label code"""
    x = stacking_input.x if isinstance(stacking_input, StackingInput) else stacking_input
    scores = model.scores(np.asarray(x, dtype=np.float64))[0]
    return SectionLabel(int(np.argmax(scores))), ScoreVector(scores=tuple(float(s) for s in scores))


def ensemble_weight_report(model: StackerModel) -> np.ndarray:
    """Mean |weight| per class (rows) and base-model block (columns), shape [7, 3]"""
    blocks = np.abs(model.weights).reshape(NUM_LABELS, len(BLOCKS), NUM_LABELS)
    return blocks.mean(axis=2)


def format_weight_report(table: np.ndarray) -> str:
    header = f"{'Class':<12}" + "".join(f"{name:>13}" for name in BLOCKS)
    lines: List[str] = [header, "-" * len(header)]
    for label in SectionLabel:
        lines.append(f"{label.render():<12}" + "".join(f"{value:>13.4f}" for value in table[int(label)]))
    return "\n".join(lines)
