"""
Word-vector storage and lookup for the recurrent models
"""

import logging
from pathlib import Path
from typing import Dict, Sequence, Union

import numpy as np

from .errors import DimensionMismatchError, EmbeddingFormatError
from .utils.text_processing import PAD_ID, UNK_ID, Vocabulary

logger = logging.getLogger(__name__)

INIT_RANGE = 0.05
DEFAULT_PRETRAINED_DIM = 300


class EmbeddingTable:
    """A [vocab_size x dim] matrix whose PAD row is pinned to zero"""

    def __init__(self, vectors: np.ndarray, trainable: bool = False):
        vectors = np.asarray(vectors)
        dtype = vectors.dtype if vectors.dtype in (np.float32, np.float64) else np.float32
        # the caller's matrix is never written to
        vectors = np.array(vectors, dtype=dtype, copy=True)
        if vectors.ndim != 2 or vectors.shape[0] < 2:
            raise DimensionMismatchError(f"Embedding matrix must be 2-D with PAD and UNK rows, got {vectors.shape}")
        if not np.all(np.isfinite(vectors)):
            raise EmbeddingFormatError("Embedding matrix contains non-finite entries")
        self.vectors = vectors
        self.vectors[PAD_ID] = 0.0
        self.trainable = trainable

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    @property
    def vocab_size(self) -> int:
        return int(self.vectors.shape[0])

    def copy(self) -> "EmbeddingTable":
        return EmbeddingTable(self.vectors.copy(), trainable=self.trainable)


def _seeded_uniform(rng: np.random.Generator, rows: int, dim: int) -> np.ndarray:
    return rng.uniform(-INIT_RANGE, INIT_RANGE, size=(rows, dim)).astype(np.float32)


def random_embeddings(vocab: Vocabulary, dim: int = 50, seed: int = 0, trainable: bool = True) -> EmbeddingTable:
    """Randomly initialized table for end-to-end training

    Args:
        vocab (Vocabulary): Vocabulary defining the rows
        dim (int): Vector dimension
        seed (int): Seed for the uniform initializer

    Returns:
        EmbeddingTable: Entries in [-0.05, 0.05]; PAD row zero
    """
    rng = np.random.default_rng(seed)
    return EmbeddingTable(_seeded_uniform(rng, len(vocab), dim), trainable=trainable)


def _read_vector_file(path: Union[str, Path]) -> Dict[str, np.ndarray]:
    vectors: Dict[str, np.ndarray] = {}
    dim = None
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                parts = line.rstrip().split()
                if not parts:
                    continue
                # optional word2vec-style "count dim" header
                if line_no == 1 and len(parts) == 2 and all(p.isdigit() for p in parts):
                    continue
                token, values = parts[0], parts[1:]
                if dim is None:
                    dim = len(values)
                if len(values) != dim or dim == 0:
                    raise EmbeddingFormatError(
                        f"{path}, line {line_no}: expected {dim} values for '{token}', got {len(values)}")
                try:
                    vector = np.array([float(v) for v in values], dtype=np.float32)
                except ValueError as e:
                    raise EmbeddingFormatError(f"{path}, line {line_no}: {e}") from e
                if not np.all(np.isfinite(vector)):
                    raise EmbeddingFormatError(f"{path}, line {line_no}: non-finite value for '{token}'")
                vectors.setdefault(token, vector)
    except OSError as e:
        raise EmbeddingFormatError(f"Cannot read embedding file '{path}': {e}") from e
    if not vectors:
        raise EmbeddingFormatError(f"Embedding file '{path}' contains no vectors")
    return vectors


def load_embeddings(path: Union[str, Path], vocab: Vocabulary, seed: int = 0,
                    trainable: bool = False) -> EmbeddingTable:
    """Build a table from a text vector file (``token v1 ... vd`` per line)

    Args:
        path (str): Vector file
        vocab (Vocabulary): Vocabulary defining the rows
        seed (int): Seed for vectors of vocabulary tokens missing from the file
        trainable (bool): Whether training may update the table

    Returns:
        EmbeddingTable: File vectors where available, seeded random rows otherwise,
        UNK set to the mean of all loaded vectors
    """
    loaded = _read_vector_file(path)
    dim = len(next(iter(loaded.values())))
    rng = np.random.default_rng(seed)
    table = _seeded_uniform(rng, len(vocab), dim)

    hits = 0
    for token_id, token in enumerate(vocab.tokens, start=2):
        vector = loaded.get(token)
        if vector is not None:
            table[token_id] = vector
            hits += 1
    table[UNK_ID] = np.mean(np.stack(list(loaded.values())), axis=0, dtype=np.float64)
    logger.info("Loaded %d-d embeddings: %d/%d vocabulary tokens found in %s",
                dim, hits, len(vocab) - 2, path)
    return EmbeddingTable(table, trainable=trainable)


def embed(ids: Sequence[int], table: EmbeddingTable) -> np.ndarray:
    """Gather table rows for a sequence of token ids

    Raises:
        DimensionMismatchError: If any id is outside the table
    """
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and (ids.min() < 0 or ids.max() >= table.vocab_size):
        raise DimensionMismatchError(f"Token id out of range for a table of {table.vocab_size} rows")
    return table.vectors[ids]
