"""
Merged baseline: the three trunks trained jointly under one softmax head
"""

from typing import Sequence

import numpy as np

from ..embeddings import EmbeddingTable
from .base import SectionModel, SentenceExample
from .focus import FocusContextModel
from .layout import LayoutModel
from .surrounding import SurroundingContextModel


class MergedModel(SectionModel):
    """Concatenated penultimate features (16 + 10 + 16 = 42) -> softmax(7)

    Trunk parameters are addressed as ``"<branch>.<layer>.<param>"``. The
    focus and surrounding trunks get their own copy of a trainable
    embedding table; a frozen table is shared.
    """

    name = "merged"

    def __init__(self, table: EmbeddingTable, seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        focus_table = table.copy() if table.trainable else table
        surrounding_table = table.copy() if table.trainable else table
        self.branches = {
            "focus": FocusContextModel(focus_table, seed * 3 + 1, dtype),
            "surrounding": SurroundingContextModel(surrounding_table, seed * 3 + 2, dtype),
            "layout": LayoutModel(seed * 3 + 3, dtype),
        }
        self.feature_width = sum(branch.feature_width for branch in self.branches.values())
        for branch_name, branch in self.branches.items():
            for layer_name, layer in branch.trunk_layers().items():
                self.layers[f"{branch_name}.{layer_name}"] = layer
        self._add_output()

    def batch_inputs(self, examples: Sequence[SentenceExample]):
        return {name: branch.batch_inputs(examples) for name, branch in self.branches.items()}

    def features(self, inputs, training: bool = False) -> np.ndarray:
        return np.concatenate([branch.features(inputs[name], training)
                               for name, branch in self.branches.items()], axis=1)

    def backward_features(self, dfeatures: np.ndarray) -> None:
        start = 0
        for branch in self.branches.values():
            branch.backward_features(dfeatures[:, start:start + branch.feature_width])
            start += branch.feature_width

    def astype(self, dtype) -> "MergedModel":
        clone = super().astype(dtype)
        for branch in clone.branches.values():
            branch.dtype = dtype
        return clone
