"""
Focus-context model: labels a sentence from its own words only
"""

from typing import Sequence, Tuple

import numpy as np

from ..embeddings import EmbeddingTable
from ..nn.layers import BiLSTM, Dense, Dropout, Embedding, MaxOverTime, MeanOverTime, pad_sequences
from .base import SectionModel, SentenceExample

LSTM_UNITS = 64


class FocusContextModel(SectionModel):
    """Bi-LSTM(64) -> [max-pool; mean-pool] -> 100 -> 30 -> 16 -> softmax(7)"""

    name = "focus"
    feature_width = 16

    def __init__(self, table: EmbeddingTable, seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        self.layers["embedding"] = Embedding(table)
        self.layers["lstm"] = BiLSTM(table.dim, LSTM_UNITS, self.rng, dtype)
        self.layers["dense1"] = Dense(4 * LSTM_UNITS, 100, "relu", self.rng, dtype)
        self.layers["dense2"] = Dense(100, 30, "relu", self.rng, dtype)
        self.layers["dense3"] = Dense(30, 16, "relu", self.rng, dtype)
        self._add_output()
        self.max_pool = MaxOverTime()
        self.mean_pool = MeanOverTime()
        self.drops = [Dropout(0.5, self.rng), Dropout(0.5, self.rng), Dropout(0.3, self.rng)]

    def batch_inputs(self, examples: Sequence[SentenceExample]) -> Tuple[np.ndarray, np.ndarray]:
        return pad_sequences([e.focus_ids for e in examples])

    def features(self, inputs, training: bool = False) -> np.ndarray:
        ids, lengths = inputs
        seq = self.layers["lstm"].forward(self.layers["embedding"].forward(ids), lengths)
        h = np.concatenate([self.max_pool.forward(seq, lengths), self.mean_pool.forward(seq, lengths)], axis=1)
        for layer_name, drop in zip(("dense1", "dense2", "dense3"), self.drops):
            h = drop.forward(self.layers[layer_name].forward(h), training)
        return h

    def backward_features(self, dfeatures: np.ndarray) -> None:
        d = dfeatures
        for layer_name, drop in zip(("dense3", "dense2", "dense1"), reversed(self.drops)):
            d = self.layers[layer_name].backward(drop.backward(d))
        width = 2 * LSTM_UNITS
        dseq = self.max_pool.backward(d[:, :width]) + self.mean_pool.backward(d[:, width:])
        self.layers["embedding"].backward(self.layers["lstm"].backward(dseq))
