"""
Layout model: a small dense network over the 17 formatting features
"""

from typing import Sequence

import numpy as np

from ..nn.layers import Dense, Dropout
from .base import SectionModel, SentenceExample
from .layout_features import NUM_LAYOUT_FEATURES


class LayoutModel(SectionModel):
    """17 -> 100 -> 16 -> softmax(7)"""

    name = "layout"
    feature_width = 16

    def __init__(self, seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        self.layers["dense1"] = Dense(NUM_LAYOUT_FEATURES, 100, "relu", self.rng, dtype)
        self.layers["dense2"] = Dense(100, 16, "relu", self.rng, dtype)
        self._add_output()
        self.drops = [Dropout(0.5, self.rng), Dropout(0.5, self.rng)]

    def batch_inputs(self, examples: Sequence[SentenceExample]) -> np.ndarray:
        return np.stack([e.layout for e in examples]).astype(self.dtype)

    def features(self, inputs: np.ndarray, training: bool = False) -> np.ndarray:
        h = self.drops[0].forward(self.layers["dense1"].forward(inputs), training)
        return self.drops[1].forward(self.layers["dense2"].forward(h), training)

    def backward_features(self, dfeatures: np.ndarray) -> None:
        d = self.layers["dense2"].backward(self.drops[1].backward(dfeatures))
        self.layers["dense1"].backward(self.drops[0].backward(d))
