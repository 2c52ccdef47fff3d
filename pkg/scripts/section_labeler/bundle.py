"""
Model bundle persistence

A bundle is a zip archive with fixed entry timestamps:

    manifest.json                format/feature versions, config, vocabulary
                                 and its SHA-256, embedding settings, stacker flags
    embeddings.npy               the shared word-vector table
    tensors/<model>/<name>.npy   one entry per parameter (little-endian float32)
    stacker/weights.npy          [7, 21] stacker weights and stacker/bias.npy (float64)
    baselines.joblib             fitted TF-IDF vectorizer and SVM

Writing the same state twice produces identical bytes.
"""

import io
import json
import logging
import zipfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import joblib
import numpy as np

from .config import PipelineConfig, parse_pipeline_config
from .errors import ConfigError, ModelFileError
from .models.layout_features import FEATURE_VERSION
from .stacking import StackerModel
from .utils.text_processing import Vocabulary

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
_FIXED_TIME = (1980, 1, 1, 0, 0, 0)


@dataclass
class ModelBundle:
    """Everything needed to label reports without retraining"""

    config: PipelineConfig
    vocab: Vocabulary
    embeddings: np.ndarray
    embeddings_trainable: bool
    states: Dict[str, Dict[str, np.ndarray]]
    stacker: StackerModel
    baselines: Optional[Any] = None
    metadata: Dict[str, Any] = field(default_factory=dict)
    feature_version: int = FEATURE_VERSION


def _npy_bytes(array: np.ndarray, dtype: str) -> bytes:
    buffer = io.BytesIO()
    np.lib.format.write_array(buffer, np.ascontiguousarray(array, dtype=dtype), allow_pickle=False)
    return buffer.getvalue()


def _write_entry(archive: zipfile.ZipFile, name: str, data: bytes) -> None:
    info = zipfile.ZipInfo(name, date_time=_FIXED_TIME)
    info.compress_type = zipfile.ZIP_DEFLATED
    info.external_attr = 0o644 << 16
    archive.writestr(info, data)


def save_bundle(bundle: ModelBundle, path: Union[str, Path]) -> Path:
    """Write a bundle to ``path``

    Args:
        bundle (ModelBundle): Trained state
        path (str): Output file

    Returns:
        Path: The written file
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensor_names = {model: sorted(state) for model, state in sorted(bundle.states.items())}
    manifest = {
        "format_version": FORMAT_VERSION,
        "feature_version": bundle.feature_version,
        "config": bundle.config.model_dump(mode="json"),
        "vocabulary": list(bundle.vocab.tokens),
        "vocabulary_sha256": bundle.vocab.content_hash(),
        "embedding_dim": int(bundle.embeddings.shape[1]),
        "embeddings_trainable": bundle.embeddings_trainable,
        "tensors": tensor_names,
        "stacker": {
            "fine_tuned": bundle.stacker.fine_tuned,
            "dataset_id": bundle.stacker.dataset_id,
            "iterations": bundle.stacker.iterations,
        },
        "has_baselines": bundle.baselines is not None,
        "metadata": bundle.metadata,
    }
    try:
        with zipfile.ZipFile(path, "w") as archive:
            _write_entry(archive, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True).encode("utf-8"))
            _write_entry(archive, "embeddings.npy", _npy_bytes(bundle.embeddings, "<f4"))
            for model, names in tensor_names.items():
                for name in names:
                    _write_entry(archive, f"tensors/{model}/{name}.npy", _npy_bytes(bundle.states[model][name], "<f4"))
            _write_entry(archive, "stacker/weights.npy", _npy_bytes(bundle.stacker.weights, "<f8"))
            _write_entry(archive, "stacker/bias.npy", _npy_bytes(bundle.stacker.bias, "<f8"))
            if bundle.baselines is not None:
                buffer = io.BytesIO()
                joblib.dump(bundle.baselines, buffer)
                _write_entry(archive, "baselines.joblib", buffer.getvalue())
    except OSError as e:
        raise ModelFileError(f"Cannot write model bundle {path}: {e}") from e
    logger.info("Saved model bundle to %s", path)
    return path


def _read_npy(archive: zipfile.ZipFile, name: str) -> np.ndarray:
    with archive.open(name) as f:
        return np.lib.format.read_array(io.BytesIO(f.read()), allow_pickle=False)


def load_bundle(path: Union[str, Path]) -> ModelBundle:
    """Read a bundle written by save_bundle

    Raises:
        ModelFileError: If the file is missing, corrupt, or was written for
            another format or layout-feature version
    """
    path = Path(path)
    if not path.is_file():
        raise ModelFileError(f"Model file not found: {path}")
    try:
        with zipfile.ZipFile(path, "r") as archive:
            manifest = json.loads(archive.read("manifest.json").decode("utf-8"))
            if manifest.get("format_version") != FORMAT_VERSION:
                raise ModelFileError(f"{path}: unsupported bundle format {manifest.get('format_version')}")
            if manifest.get("feature_version") != FEATURE_VERSION:
                raise ModelFileError(f"{path}: layout feature version {manifest.get('feature_version')} "
                                     f"does not match this build ({FEATURE_VERSION})")
            vocab = Vocabulary(manifest["vocabulary"])
            if vocab.content_hash() != manifest["vocabulary_sha256"]:
                raise ModelFileError(f"{path}: vocabulary hash mismatch")
            states = {
                model: {name: _read_npy(archive, f"tensors/{model}/{name}.npy").astype(np.float32) for name in names}
                for model, names in manifest["tensors"].items()
            }
            stacker_meta = manifest["stacker"]
            stacker = StackerModel(
                weights=_read_npy(archive, "stacker/weights.npy").astype(np.float64),
                bias=_read_npy(archive, "stacker/bias.npy").astype(np.float64),
                fine_tuned=bool(stacker_meta["fine_tuned"]),
                dataset_id=stacker_meta["dataset_id"],
                iterations=int(stacker_meta["iterations"]),
            )
            baselines = None
            if manifest.get("has_baselines"):
                with archive.open("baselines.joblib") as f:
                    baselines = joblib.load(io.BytesIO(f.read()))
            embeddings = _read_npy(archive, "embeddings.npy").astype(np.float32)
    except (zipfile.BadZipFile, KeyError, ValueError, OSError) as e:
        raise ModelFileError(f"Cannot read model bundle {path}: {e}") from e

    try:
        config = parse_pipeline_config(manifest["config"])
    except ConfigError as e:
        raise ModelFileError(f"{path}: stored configuration is invalid: {e}") from e
    return ModelBundle(
        config=config,
        vocab=vocab,
        embeddings=embeddings,
        embeddings_trainable=bool(manifest["embeddings_trainable"]),
        states=states,
        stacker=stacker,
        baselines=baselines,
        metadata=manifest.get("metadata", {}),
    )
