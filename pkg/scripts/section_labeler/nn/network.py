"""
Base class for classifiers assembled from nn layers
"""

import copy
import hashlib
import threading
from typing import Any, Dict, Sequence

import numpy as np

from .layers import Layer, batch_cross_entropy


class Network:
    """A classifier made of named layers, trained with batch cross-entropy

    Subclasses register their layers in ``self.layers`` and implement
    ``batch_inputs``, ``forward`` and ``backward``. Parameters are addressed
    as ``"<layer>.<param>"``.
    """

    def __init__(self):
        self.layers: Dict[str, Layer] = {}
        self._lock = threading.RLock()

    def __getstate__(self):
        state = self.__dict__.copy()
        state.pop("_lock", None)
        return state

    def __setstate__(self, state):
        self.__dict__.update(state)
        self._lock = threading.RLock()

    # -- subclass interface -------------------------------------------------

    def batch_inputs(self, examples: Sequence[Any]) -> Any:
        raise NotImplementedError

    def forward(self, inputs: Any, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dprobs: np.ndarray) -> None:
        raise NotImplementedError

    # -- parameters ---------------------------------------------------------

    def _flat_layers(self) -> Dict[str, Layer]:
        flat = {}
        for name, layer in self.layers.items():
            cells = getattr(layer, "cells", None)
            if cells:
                for suffix, cell in cells.items():
                    flat[f"{name}.{suffix}"] = cell
            else:
                flat[name] = layer
        return flat

    def named_parameters(self) -> Dict[str, np.ndarray]:
        return {f"{lname}.{pname}": value
                for lname, layer in self._flat_layers().items()
                for pname, value in layer.params.items()}

    def named_gradients(self) -> Dict[str, np.ndarray]:
        return {f"{lname}.{pname}": layer.grads[pname]
                for lname, layer in self._flat_layers().items()
                for pname in layer.params}

    def parameter_count(self) -> int:
        return int(sum(value.size for value in self.named_parameters().values()))

    def zero_grad(self) -> None:
        for layer in self.layers.values():
            layer.zero_grad()

    def state_dict(self) -> Dict[str, np.ndarray]:
        return {name: value.copy() for name, value in self.named_parameters().items()}

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        params = self.named_parameters()
        missing = set(params) - set(state)
        if missing:
            raise KeyError(f"State is missing parameters: {sorted(missing)}")
        for name, value in params.items():
            if state[name].shape != value.shape:
                raise ValueError(f"Shape mismatch for {name}: {state[name].shape} vs {value.shape}")
            value[...] = state[name]

    def parameter_hash(self) -> str:
        """SHA-256 over every parameter, in name order"""
        digest = hashlib.sha256()
        for name, value in sorted(self.named_parameters().items()):
            digest.update(name.encode("utf-8"))
            digest.update(np.ascontiguousarray(value).tobytes())
        return digest.hexdigest()

    def astype(self, dtype) -> "Network":
        """Deep copy with every parameter cast to ``dtype``"""
        clone = copy.deepcopy(self)
        for layer in clone.layers.values():
            layer.astype(dtype)
        return clone

    # -- training and inference --------------------------------------------

    def loss_and_grads(self, inputs: Any, targets: np.ndarray, training: bool = True) -> float:
        """Zero gradients, run forward and backward, return the mean loss"""
        self.zero_grad()
        probs = self.forward(inputs, training=training)
        loss, dprobs = batch_cross_entropy(probs, np.asarray(targets, dtype=np.int64))
        self.backward(dprobs)
        return loss

    def predict_proba(self, examples: Sequence[Any], batch_size: int = 256) -> np.ndarray:
        """Inference-mode probabilities [N, 7]"""
        if not examples:
            return np.zeros((0, 7), dtype=np.float32)
        # layers cache activations, so concurrent callers are serialized
        with self._lock:
            chunks = [self.forward(self.batch_inputs(examples[i:i + batch_size]), training=False)
                      for i in range(0, len(examples), batch_size)]
        return np.concatenate(chunks, axis=0)

    def predict(self, examples: Sequence[Any], batch_size: int = 256) -> np.ndarray:
        return np.argmax(self.predict_proba(examples, batch_size), axis=1)

