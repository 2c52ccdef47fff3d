"""
Surrounding-context model: the focus sentence plus its two neighbors
"""

from typing import Sequence, Tuple

import numpy as np

from ..embeddings import EmbeddingTable
from ..nn.layers import BiLSTM, Dense, Dropout, Embedding, MaxOverTime, pad_sequences
from .base import SectionModel, SentenceExample

FOCUS_UNITS = 64
NEIGHBOR_UNITS = 16
BRANCHES = ("focus", "prev", "next")


class SurroundingContextModel(SectionModel):
    """Bi-LSTM(64) on the focus, Bi-LSTM(16) on each neighbor, max-pooled -> 50 -> 10 -> softmax(7)

    The three branches share the embedding table but not their recurrent
    weights. All branches are embedded in a single padded batch so the
    embedding gradient is accumulated once.
    """

    name = "surrounding"
    feature_width = 10

    def __init__(self, table: EmbeddingTable, seed: int = 0, dtype=np.float32):
        super().__init__(seed, dtype)
        self.layers["embedding"] = Embedding(table)
        self.layers["lstm_focus"] = BiLSTM(table.dim, FOCUS_UNITS, self.rng, dtype)
        self.layers["lstm_prev"] = BiLSTM(table.dim, NEIGHBOR_UNITS, self.rng, dtype)
        self.layers["lstm_next"] = BiLSTM(table.dim, NEIGHBOR_UNITS, self.rng, dtype)
        self.layers["dense1"] = Dense(2 * (FOCUS_UNITS + 2 * NEIGHBOR_UNITS), 50, "relu", self.rng, dtype)
        self.layers["dense2"] = Dense(50, 10, "relu", self.rng, dtype)
        self._add_output()
        self.pools = {branch: MaxOverTime() for branch in BRANCHES}
        self.drops = [Dropout(0.5, self.rng), Dropout(0.3, self.rng)]
        self._batch = 0

    def batch_inputs(self, examples: Sequence[SentenceExample]) -> Tuple[np.ndarray, np.ndarray, int]:
        sequences = ([e.focus_ids for e in examples] + [e.prev_ids for e in examples]
                     + [e.next_ids for e in examples])
        ids, lengths = pad_sequences(sequences)
        return ids, lengths, len(examples)

    def features(self, inputs, training: bool = False) -> np.ndarray:
        ids, lengths, batch = inputs
        self._batch = batch
        embedded = self.layers["embedding"].forward(ids)
        pooled = []
        for slot, branch in enumerate(BRANCHES):
            rows = slice(slot * batch, (slot + 1) * batch)
            seq = self.layers[f"lstm_{branch}"].forward(embedded[rows], lengths[rows])
            pooled.append(self.pools[branch].forward(seq, lengths[rows]))
        h = np.concatenate(pooled, axis=1)
        h = self.drops[0].forward(self.layers["dense1"].forward(h), training)
        return self.drops[1].forward(self.layers["dense2"].forward(h), training)

    def backward_features(self, dfeatures: np.ndarray) -> None:
        d = self.layers["dense2"].backward(self.drops[1].backward(dfeatures))
        d = self.layers["dense1"].backward(self.drops[0].backward(d))
        widths = (2 * FOCUS_UNITS, 2 * NEIGHBOR_UNITS, 2 * NEIGHBOR_UNITS)
        offsets = np.cumsum((0,) + widths)
        dembedded = []
        for slot, branch in enumerate(BRANCHES):
            dpooled = d[:, offsets[slot]:offsets[slot + 1]]
            dseq = self.pools[branch].backward(dpooled)
            dembedded.append(self.layers[f"lstm_{branch}"].backward(dseq))
        self.layers["embedding"].backward(np.concatenate(dembedded, axis=0))
