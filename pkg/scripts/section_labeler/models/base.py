"""
Shared input representation and the base class for the section classifiers
"""

from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..core_types import Report, SectionLabel
from ..nn.layers import Dense
from ..nn.network import Network
from ..utils.text_processing import PAD_ID, Vocabulary, tokenize
from ..weak_labeler import RuleSet, detect_headers
from .layout_features import extract_layout_features

UNLABELED = -1


@dataclass(frozen=True)
class SentenceExample:
    """Everything any of the classifiers needs to label one sentence"""

    report_id: str
    index: int
    focus_ids: Tuple[int, ...]
    prev_ids: Tuple[int, ...]
    next_ids: Tuple[int, ...]
    layout: np.ndarray
    label: int = UNLABELED


def build_examples(report: Report, vocab: Vocabulary, rules: RuleSet,
                   labels: Optional[Sequence[SectionLabel]] = None,
                   raw_counts: bool = False) -> List[SentenceExample]:
    """Turn a segmented report into one example per sentence

    Neighbors outside the report are the empty-string tokenization ([PAD]).

    Args:
        report (Report): Segmented report
        vocab (Vocabulary): Token lookup
        rules (RuleSet): Header rules feeding the layout features
        labels (list, optional): One label per sentence
        raw_counts (bool): Unnormalized character counts in the layout features

    Returns:
        list: SentenceExample objects in sentence order
    """
    if labels is not None and len(labels) != len(report.sentences):
        raise ValueError(f"Report {report.id}: {len(labels)} labels for {len(report.sentences)} sentences")
    ids = [tokenize(sentence, vocab).token_ids for sentence in report.sentences]
    headers = detect_headers(report, rules)
    empty = (PAD_ID,)
    examples = []
    for i, focus in enumerate(ids):
        examples.append(SentenceExample(
            report_id=report.id,
            index=i,
            focus_ids=focus,
            prev_ids=ids[i - 1] if i > 0 else empty,
            next_ids=ids[i + 1] if i + 1 < len(ids) else empty,
            layout=extract_layout_features(report, i, headers, raw_counts),
            label=int(labels[i]) if labels is not None else UNLABELED,
        ))
    return examples


class SectionModel(Network):
    """A trunk producing penultimate features followed by a 7-way softmax output

    Subclasses build the trunk and implement ``features`` and
    ``backward_features``; the merged model reuses trunks without their
    output layers.
    """

    name = "model"
    feature_width = 0

    def __init__(self, seed: int = 0, dtype=np.float32):
        super().__init__()
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.dtype = dtype

    def _add_output(self) -> None:
        self.layers["output"] = Dense(self.feature_width, 7, "softmax", self.rng, self.dtype)

    def trunk_layers(self) -> Dict[str, Any]:
        return {name: layer for name, layer in self.layers.items() if name != "output"}

    def features(self, inputs: Any, training: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward_features(self, dfeatures: np.ndarray) -> None:
        raise NotImplementedError

    def forward(self, inputs: Any, training: bool = False) -> np.ndarray:
        return self.layers["output"].forward(self.features(inputs, training))

    def backward(self, dprobs: np.ndarray) -> None:
        self.backward_features(self.layers["output"].backward(dprobs))

    def astype(self, dtype) -> "SectionModel":
        clone = super().astype(dtype)
        clone.dtype = dtype
        return clone
