"""
Section classifiers: focus context, surrounding context, layout and merged
"""

from .base import SectionModel, SentenceExample, build_examples
from .definitions import BASE_MODELS, NEURAL_MODELS, create_model, create_models

__all__ = [
    "SectionModel",
    "SentenceExample",
    "build_examples",
    "BASE_MODELS",
    "NEURAL_MODELS",
    "create_model",
    "create_models",
]
