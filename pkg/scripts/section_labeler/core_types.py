"""
Shared domain vocabulary for section labeling

Reports, sentences, the seven-way label set, probability vectors and
dataset splits. Every type here is immutable once constructed.
"""

import math
from enum import Enum, IntEnum
from typing import List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from .errors import ConfigError, EmptyCorpusError

NUM_LABELS = 7


class SectionLabel(IntEnum):
    """The seven section categories, each with a stable integer code"""

    REASON = 0
    HISTORY = 1
    COMPARISON = 2
    TECHNIQUE = 3
    FINDINGS = 4
    IMPRESSION = 5
    OTHERS = 6

    def render(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, name: str) -> "SectionLabel":
        """Parse a rendered label name (case-insensitive)

        Args:
            name (str): Label name such as "Findings"

        Returns:
            SectionLabel: The matching label

        Raises:
            ValueError: If the name is not one of the seven labels
        """
        key = name.strip().upper()
        if key not in cls.__members__:
            raise ValueError(f"Unknown section label: {name!r}")
        return cls[key]

    def __str__(self) -> str:
        return self.render()


class LabelSource(str, Enum):
    """Where a sentence label came from"""

    WEAK = "weak"
    GOLD = "gold"
    PREDICTED = "predicted"


class Sentence(BaseModel):
    """A sentence and its character span within a report"""

    model_config = ConfigDict(frozen=True)

    text: str = Field(description="Sentence text, exactly report_text[begin:end].")
    begin: int = Field(ge=0, description="Inclusive character offset into the report.")
    end: int = Field(description="Exclusive character offset into the report.")
    index: int = Field(ge=0, description="Ordinal position within the report.")

    @model_validator(mode="after")
    def _check_span(self) -> "Sentence":
        if self.end <= self.begin:
            raise ValueError(f"Sentence {self.index} has an empty span [{self.begin}, {self.end})")
        if len(self.text) != self.end - self.begin:
            raise ValueError(f"Sentence {self.index} text length does not match its span")
        return self


class Report(BaseModel):
    """A raw report with its ordered, segmented sentences"""

    model_config = ConfigDict(frozen=True)

    id: str
    raw_text: str
    sentences: Tuple[Sentence, ...] = ()

    @field_validator("sentences", mode="before")
    @classmethod
    def _as_tuple(cls, value):
        return tuple(value)

    @model_validator(mode="after")
    def _check_sentences(self) -> "Report":
        previous_end = 0
        for position, sentence in enumerate(self.sentences):
            if sentence.index != position:
                raise ValueError(f"Report {self.id}: sentence indices must be 0..n-1 without gaps")
            if sentence.end > len(self.raw_text):
                raise ValueError(f"Report {self.id}: sentence {position} is out of bounds")
            if sentence.begin < previous_end:
                raise ValueError(f"Report {self.id}: sentences overlap or are unsorted at {position}")
            if self.raw_text[sentence.begin:sentence.end] != sentence.text:
                raise ValueError(f"Report {self.id}: sentence {position} does not match the raw text")
            previous_end = sentence.end
        return self

    def __len__(self) -> int:
        return len(self.sentences)


class LabeledSentence(BaseModel):
    """A sentence, its section label and the label's provenance"""

    model_config = ConfigDict(frozen=True)

    sentence: Sentence
    label: SectionLabel
    source: LabelSource


class AnnotatedReport(BaseModel):
    """A report paired with one label per sentence"""

    model_config = ConfigDict(frozen=True)

    report: Report
    labels: Tuple[LabeledSentence, ...]

    @field_validator("labels", mode="before")
    @classmethod
    def _as_tuple(cls, value):
        return tuple(value)

    @model_validator(mode="after")
    def _check_alignment(self) -> "AnnotatedReport":
        if len(self.labels) != len(self.report.sentences):
            raise ValueError(f"Report {self.report.id}: expected one label per sentence")
        return self

    @property
    def label_codes(self) -> List[int]:
        return [int(item.label) for item in self.labels]


class ProbVector(BaseModel):
    """A seven-way probability distribution emitted by a model"""

    model_config = ConfigDict(frozen=True)

    p: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_distribution(self) -> "ProbVector":
        if len(self.p) != NUM_LABELS:
            raise ValueError(f"ProbVector needs {NUM_LABELS} entries, got {len(self.p)}")
        if any(value < 0.0 or value > 1.0 for value in self.p):
            raise ValueError("ProbVector entries must lie in [0, 1]")
        if abs(math.fsum(self.p) - 1.0) > 1e-6:
            raise ValueError("ProbVector entries must sum to 1")
        return self

    @classmethod
    def from_array(cls, values: np.ndarray) -> "ProbVector":
        return cls(p=tuple(float(v) for v in np.asarray(values, dtype=np.float64)))

    def argmax(self) -> SectionLabel:
        return SectionLabel(int(np.argmax(self.p)))


class ScoreVector(BaseModel):
    """Seven per-class decision scores without the sum-to-one constraint"""

    model_config = ConfigDict(frozen=True)

    scores: Tuple[float, ...]

    @model_validator(mode="after")
    def _check_length(self) -> "ScoreVector":
        if len(self.scores) != NUM_LABELS:
            raise ValueError(f"ScoreVector needs {NUM_LABELS} entries, got {len(self.scores)}")
        return self

    def normalized(self) -> Tuple[float, ...]:
        """Scores rescaled to sum to one, for reporting only"""
        total = math.fsum(self.scores)
        if total <= 0.0:
            return tuple(1.0 / NUM_LABELS for _ in self.scores)
        return tuple(score / total for score in self.scores)


class DatasetSplit(BaseModel):
    """Report-level train / stacking-holdout / test partition"""

    model_config = ConfigDict(frozen=True)

    train: Tuple[Report, ...]
    stacking_holdout: Tuple[Report, ...]
    test: Tuple[Report, ...]
    proportions: Tuple[float, float, float]


def _validate_ratios(ratios: Sequence[float]) -> Tuple[float, float, float]:
    if len(ratios) != 3:
        raise ConfigError(f"Split ratios must have three entries, got {len(ratios)}")
    if any(r < 0 for r in ratios):
        raise ConfigError(f"Split ratios must be non-negative: {tuple(ratios)}")
    if abs(math.fsum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"Split ratios must sum to 1, got {math.fsum(ratios)}")
    return float(ratios[0]), float(ratios[1]), float(ratios[2])


def split_sizes(n: int, ratios: Sequence[float]) -> Tuple[int, int, int]:
    """Part sizes for a split; the holdout and test parts are floored and
    any remainder goes to train (856 at 0.8/0.1/0.1 gives 686/85/85)."""
    _, r_holdout, r_test = _validate_ratios(ratios)
    n_holdout = int(math.floor(n * r_holdout + 1e-9))
    n_test = int(math.floor(n * r_test + 1e-9))
    return n - n_holdout - n_test, n_holdout, n_test


def split_dataset(reports: Sequence[Report], ratios: Sequence[float], seed: int) -> DatasetSplit:
    """Shuffle reports under a seed and partition them into three parts

    Args:
        reports (list): Reports to split (never split below report level)
        ratios (tuple): (train, stacking_holdout, test) proportions summing to 1
        seed (int): Seed for the deterministic shuffle

    Returns:
        DatasetSplit: The partition
    """
    if not reports:
        raise EmptyCorpusError("empty corpus")
    proportions = _validate_ratios(ratios)
    n_train, n_holdout, _ = split_sizes(len(reports), proportions)

    order = np.random.default_rng(seed).permutation(len(reports))
    shuffled = [reports[i] for i in order]
    return DatasetSplit(
        train=tuple(shuffled[:n_train]),
        stacking_holdout=tuple(shuffled[n_train:n_train + n_holdout]),
        test=tuple(shuffled[n_train + n_holdout:]),
        proportions=proportions,
    )
