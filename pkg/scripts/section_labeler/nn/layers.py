"""
Trainable building blocks with hand-written backward passes

Every layer caches what its backward pass needs during ``forward`` and
accumulates parameter gradients into ``grads`` during ``backward``.
Sequences are batched as [B, T, d] with right padding; ``lengths`` gives
the true length of each row and padded steps are masked out of pooling.
"""

from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from ..embeddings import EmbeddingTable
from ..errors import DimensionMismatchError
from ..utils.text_processing import PAD_ID

ACTIVATIONS = ("relu", "softmax", "none")


def sigmoid(x: np.ndarray) -> np.ndarray:
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise softmax with max subtraction and float64 normalization"""
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted.astype(np.float64))
    return (e / np.sum(e, axis=-1, keepdims=True)).astype(z.dtype)


def cross_entropy(pred: np.ndarray, target: int) -> float:
    """-log(pred[target]) with the prediction clamped at 1e-12"""
    return float(-np.log(max(float(pred[target]), 1e-12)))


def batch_cross_entropy(probs: np.ndarray, targets: np.ndarray) -> Tuple[float, np.ndarray]:
    """Mean cross-entropy of a batch and its gradient with respect to ``probs``"""
    batch = probs.shape[0]
    rows = np.arange(batch)
    picked = np.maximum(probs[rows, targets].astype(np.float64), 1e-12)
    loss = float(-np.mean(np.log(picked)))
    dprobs = np.zeros_like(probs)
    dprobs[rows, targets] = (-1.0 / picked / batch).astype(probs.dtype)
    return loss, dprobs


def glorot_uniform(rng: np.random.Generator, n_in: int, n_out: int, dtype) -> np.ndarray:
    limit = np.sqrt(6.0 / (n_in + n_out))
    return rng.uniform(-limit, limit, size=(n_in, n_out)).astype(dtype)


class Layer:
    """A parameter container with matching gradient buffers"""

    def __init__(self):
        self.params: Dict[str, np.ndarray] = {}
        self.grads: Dict[str, np.ndarray] = {}

    def zero_grad(self) -> None:
        for name, value in self.params.items():
            self.grads[name] = np.zeros_like(value)

    def astype(self, dtype) -> None:
        for name in list(self.params):
            self.params[name] = self.params[name].astype(dtype)
        self.zero_grad()


class Dense(Layer):
    """Fully-connected layer with relu, softmax or no activation"""

    def __init__(self, n_in: int, n_out: int, activation: str = "none",
                 rng: Optional[np.random.Generator] = None, dtype=np.float32):
        super().__init__()
        if activation not in ACTIVATIONS:
            raise ValueError(f"Unknown activation {activation!r}")
        rng = rng if rng is not None else np.random.default_rng(0)
        self.activation = activation
        self.params = {"W": glorot_uniform(rng, n_in, n_out, dtype), "b": np.zeros(n_out, dtype=dtype)}
        self.zero_grad()
        self._x = None
        self._out = None

    @property
    def n_in(self) -> int:
        return self.params["W"].shape[0]

    @property
    def n_out(self) -> int:
        return self.params["W"].shape[1]

    def forward(self, x: np.ndarray) -> np.ndarray:
        if x.shape[-1] != self.n_in:
            raise DimensionMismatchError(f"Dense layer expects {self.n_in} inputs, got {x.shape[-1]}")
        self._x = x
        z = x @ self.params["W"] + self.params["b"]
        if self.activation == "relu":
            out = np.maximum(z, 0)
        elif self.activation == "softmax":
            out = softmax(z)
        else:
            out = z
        self._out = out
        return out

    def backward(self, dout: np.ndarray) -> np.ndarray:
        if self.activation == "relu":
            dz = dout * (self._out > 0)
        elif self.activation == "softmax":
            p = self._out
            dz = p * (dout - np.sum(dout * p, axis=-1, keepdims=True))
        else:
            dz = dout
        self.grads["W"] += self._x.T @ dz
        self.grads["b"] += dz.sum(axis=0)
        return dz @ self.params["W"].T


class Dropout:
    """Inverted dropout: survivors are scaled by 1/(1-rate) at training time"""

    def __init__(self, rate: float, rng: np.random.Generator):
        if not 0.0 <= rate < 1.0:
            raise ValueError(f"Dropout rate must be in [0, 1), got {rate}")
        self.rate = rate
        self.rng = rng
        self._mask = None

    def forward(self, x: np.ndarray, training: bool) -> np.ndarray:
        if not training or self.rate == 0.0:
            self._mask = None
            return x
        self._mask = ((self.rng.random(x.shape) >= self.rate) / (1.0 - self.rate)).astype(x.dtype)
        return x * self._mask

    def backward(self, dout: np.ndarray) -> np.ndarray:
        return dout if self._mask is None else dout * self._mask


def dropout(x: np.ndarray, rate: float, training: bool, rng: np.random.Generator) -> np.ndarray:
    """Functional inverted dropout"""
    return Dropout(rate, rng).forward(x, training)


class Embedding(Layer):
    """Token-id lookup into an EmbeddingTable; the PAD row never receives gradient"""

    def __init__(self, table: EmbeddingTable):
        super().__init__()
        self.table = table
        if table.trainable:
            self.params = {"E": table.vectors}
            self.zero_grad()
        self._ids = None

    def astype(self, dtype) -> None:
        self.table = EmbeddingTable(self.table.vectors.astype(dtype), trainable=self.table.trainable)
        if self.table.trainable:
            self.params = {"E": self.table.vectors}
        self.zero_grad()

    def forward(self, ids: np.ndarray) -> np.ndarray:
        if ids.size and (ids.min() < 0 or ids.max() >= self.table.vocab_size):
            raise DimensionMismatchError(f"Token id out of range for a table of {self.table.vocab_size} rows")
        self._ids = ids
        return self.table.vectors[ids]

    def backward(self, dout: np.ndarray) -> None:
        if not self.table.trainable:
            return
        grad = self.grads["E"]
        np.add.at(grad, self._ids.reshape(-1), dout.reshape(-1, dout.shape[-1]))
        grad[PAD_ID] = 0.0


class LSTMCell(Layer):
    """One direction of an LSTM; gate blocks are ordered input, forget, output, candidate"""

    def __init__(self, n_in: int, units: int, rng: Optional[np.random.Generator] = None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        limit = 1.0 / np.sqrt(units)
        b = np.zeros(4 * units, dtype=dtype)
        b[units:2 * units] = 1.0
        self.params = {
            "W": rng.uniform(-limit, limit, size=(n_in, 4 * units)).astype(dtype),
            "U": rng.uniform(-limit, limit, size=(units, 4 * units)).astype(dtype),
            "b": b,
        }
        self.units = units
        self.zero_grad()
        self._cache = None

    @property
    def n_in(self) -> int:
        return self.params["W"].shape[0]

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Run the recurrence over x [B, T, d] from zero state; returns [B, T, units]"""
        if x.ndim != 3 or x.shape[2] != self.n_in:
            raise DimensionMismatchError(f"LSTM expects inputs of width {self.n_in}, got shape {x.shape}")
        B, T, _ = x.shape
        u = self.units
        W, U, b = self.params["W"], self.params["U"], self.params["b"]
        xw = (x.reshape(B * T, -1) @ W).reshape(B, T, 4 * u) + b

        h = np.zeros((B, u), dtype=x.dtype)
        c = np.zeros((B, u), dtype=x.dtype)
        gates = np.empty((B, T, 4 * u), dtype=x.dtype)
        cells = np.empty((B, T + 1, u), dtype=x.dtype)
        hidden = np.empty((B, T + 1, u), dtype=x.dtype)
        tanh_c = np.empty((B, T, u), dtype=x.dtype)
        cells[:, 0] = c
        hidden[:, 0] = h
        for t in range(T):
            z = xw[:, t] + h @ U
            ifo = sigmoid(z[:, :3 * u])
            g = np.tanh(z[:, 3 * u:])
            c = ifo[:, u:2 * u] * c + ifo[:, :u] * g
            tc = np.tanh(c)
            h = ifo[:, 2 * u:] * tc
            gates[:, t, :3 * u] = ifo
            gates[:, t, 3 * u:] = g
            cells[:, t + 1] = c
            hidden[:, t + 1] = h
            tanh_c[:, t] = tc
        self._cache = (x, gates, cells, hidden, tanh_c)
        return hidden[:, 1:]

    def backward(self, dh_seq: np.ndarray) -> np.ndarray:
        """Backpropagate through time; returns d(inputs) [B, T, d]"""
        x, gates, cells, hidden, tanh_c = self._cache
        B, T, _ = x.shape
        u = self.units
        W, U = self.params["W"], self.params["U"]
        dz_all = np.empty((B, T, 4 * u), dtype=x.dtype)
        dh_next = np.zeros((B, u), dtype=x.dtype)
        dc_next = np.zeros((B, u), dtype=x.dtype)
        for t in reversed(range(T)):
            i = gates[:, t, :u]
            f = gates[:, t, u:2 * u]
            o = gates[:, t, 2 * u:3 * u]
            g = gates[:, t, 3 * u:]
            tc = tanh_c[:, t]
            dh = dh_seq[:, t] + dh_next
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = dz_all[:, t]
            dz[:, :u] = dc * g * i * (1.0 - i)
            dz[:, u:2 * u] = dc * cells[:, t] * f * (1.0 - f)
            dz[:, 2 * u:3 * u] = dh * tc * o * (1.0 - o)
            dz[:, 3 * u:] = dc * i * (1.0 - g * g)
            dc_next = dc * f
            dh_next = dz @ U.T
        flat_dz = dz_all.reshape(B * T, 4 * u)
        self.grads["W"] += x.reshape(B * T, -1).T @ flat_dz
        self.grads["U"] += hidden[:, :-1].reshape(B * T, u).T @ flat_dz
        self.grads["b"] += flat_dz.sum(axis=0)
        return (flat_dz @ W.T).reshape(B, T, -1)


def lstm_forward(inputs: np.ndarray, cell: LSTMCell) -> np.ndarray:
    """Hidden states [T, units] for a single unbatched sequence [T, d]"""
    inputs = np.asarray(inputs, dtype=cell.params["W"].dtype)
    if inputs.ndim != 2 or inputs.shape[0] < 1:
        raise DimensionMismatchError(f"lstm_forward expects a non-empty [T, d] matrix, got {inputs.shape}")
    return cell.forward(inputs[None])[0]


def reverse_index(lengths: np.ndarray, T: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gather indices reversing each row within its true length (padding stays at the tail)"""
    steps = np.arange(T)[None, :]
    lengths = lengths[:, None]
    idx = np.where(steps < lengths, lengths - 1 - steps, steps)
    rows = np.broadcast_to(np.arange(idx.shape[0])[:, None], idx.shape)
    return rows, idx


class BiLSTM(Layer):
    """Forward and backward LSTM cells concatenated per timestep -> [B, T, 2*units]"""

    def __init__(self, n_in: int, units: int, rng: Optional[np.random.Generator] = None, dtype=np.float32):
        super().__init__()
        rng = rng if rng is not None else np.random.default_rng(0)
        self.units = units
        self.forward_cell = LSTMCell(n_in, units, rng, dtype)
        self.backward_cell = LSTMCell(n_in, units, rng, dtype)
        self._index = None

    @property
    def cells(self) -> Dict[str, LSTMCell]:
        return {"fw": self.forward_cell, "bw": self.backward_cell}

    def zero_grad(self) -> None:
        for cell in self.cells.values():
            cell.zero_grad()

    def astype(self, dtype) -> None:
        for cell in self.cells.values():
            cell.astype(dtype)

    def forward(self, x: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        rows, idx = reverse_index(lengths, x.shape[1])
        self._index = (rows, idx)
        h_fw = self.forward_cell.forward(x)
        h_bw = self.backward_cell.forward(x[rows, idx])[rows, idx]
        return np.concatenate([h_fw, h_bw], axis=-1)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        rows, idx = self._index
        u = self.units
        dx = self.forward_cell.backward(dout[..., :u])
        dx_rev = self.backward_cell.backward(dout[..., u:][rows, idx])
        return dx + dx_rev[rows, idx]


def sequence_mask(lengths: np.ndarray, T: int) -> np.ndarray:
    return np.arange(T)[None, :] < lengths[:, None]


class MaxOverTime:
    """Column-wise max over the unmasked timesteps"""

    def __init__(self):
        self._cache = None

    def forward(self, seq: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        mask = sequence_mask(lengths, seq.shape[1])
        masked = np.where(mask[..., None], seq, -np.inf)
        arg = np.argmax(masked, axis=1)
        self._cache = (seq.shape, arg)
        return np.take_along_axis(seq, arg[:, None, :], axis=1)[:, 0, :]

    def backward(self, dout: np.ndarray) -> np.ndarray:
        shape, arg = self._cache
        dseq = np.zeros(shape, dtype=dout.dtype)
        np.put_along_axis(dseq, arg[:, None, :], dout[:, None, :], axis=1)
        return dseq


class MeanOverTime:
    """Column-wise mean over the unmasked timesteps, dividing by the true length"""

    def __init__(self):
        self._cache = None

    def forward(self, seq: np.ndarray, lengths: np.ndarray) -> np.ndarray:
        mask = sequence_mask(lengths, seq.shape[1]).astype(seq.dtype)
        self._cache = (mask, lengths)
        total = np.sum(seq * mask[..., None], axis=1, dtype=np.float64)
        return (total / lengths[:, None]).astype(seq.dtype)

    def backward(self, dout: np.ndarray) -> np.ndarray:
        mask, lengths = self._cache
        return (dout / lengths[:, None].astype(dout.dtype))[:, None, :] * mask[..., None]


def max_over_time(seq: np.ndarray) -> np.ndarray:
    """Column-wise max of a [T, d] sequence"""
    seq = np.asarray(seq)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise DimensionMismatchError("empty sequence")
    return seq.max(axis=0)


def mean_over_time(seq: np.ndarray) -> np.ndarray:
    """Column-wise mean of a [T, d] sequence"""
    seq = np.asarray(seq)
    if seq.ndim != 2 or seq.shape[0] == 0:
        raise DimensionMismatchError("empty sequence")
    return np.mean(seq, axis=0, dtype=np.float64).astype(seq.dtype)


def pad_sequences(sequences: Sequence[Sequence[int]]) -> Tuple[np.ndarray, np.ndarray]:
    """Right-pad id sequences with PAD; returns ids [B, T] and lengths [B]"""
    lengths = np.array([max(len(s), 1) for s in sequences], dtype=np.int64)
    ids = np.full((len(sequences), int(lengths.max()) if len(sequences) else 1), PAD_ID, dtype=np.int64)
    for row, seq in enumerate(sequences):
        ids[row, :len(seq)] = seq
    return ids, lengths
