"""
Model definitions for section labeling

This module builds every neural classifier the pipeline trains and hands
them back together, keyed by name.
"""

from typing import Dict

from ..config import PipelineConfig
from ..embeddings import EmbeddingTable
from .base import SectionModel
from .focus import FocusContextModel
from .layout import LayoutModel
from .merged import MergedModel
from .surrounding import SurroundingContextModel

BASE_MODELS = ("focus", "surrounding", "layout")
NEURAL_MODELS = BASE_MODELS + ("merged",)


def _table_for(table: EmbeddingTable) -> EmbeddingTable:
    # models must not update each other's embeddings
    return table.copy() if table.trainable else table


def create_models(config: PipelineConfig, table: EmbeddingTable) -> Dict[str, SectionModel]:
    """Create the three base models and the merged baseline

    Args:
        config (PipelineConfig): Supplies each model's initialization seed
        table (EmbeddingTable): Word vectors shared by the recurrent models

    Returns:
        dict: Model name -> freshly initialized model
    """
    return {
        "focus": FocusContextModel(_table_for(table), seed=config.focus.dropout_seed),
        "surrounding": SurroundingContextModel(_table_for(table), seed=config.surrounding.dropout_seed),
        "layout": LayoutModel(seed=config.layout.dropout_seed),
        "merged": MergedModel(table, seed=config.merged.dropout_seed),
    }


def create_model(name: str, table: EmbeddingTable, seed: int = 0) -> SectionModel:
    """Create a single model by name"""
    if name == "focus":
        return FocusContextModel(_table_for(table), seed=seed)
    if name == "surrounding":
        return SurroundingContextModel(_table_for(table), seed=seed)
    if name == "layout":
        return LayoutModel(seed=seed)
    if name == "merged":
        return MergedModel(table, seed=seed)
    raise ValueError(f"Unknown model: {name!r} (expected one of {', '.join(NEURAL_MODELS)})")
