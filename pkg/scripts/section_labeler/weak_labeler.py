"""
Rule-based section labeling

Detects section headers with start-anchored keyword patterns and spreads
each header's label over the sentences up to the next header. Used both to
bootstrap training labels and as the rule-based baselines.
"""

import logging
import re
from typing import Dict, List, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, PrivateAttr, field_validator

from .core_types import LabeledSentence, LabelSource, Report, SectionLabel
from .errors import ConfigError
from .utils.template_loader import load_rule_text

logger = logging.getLogger(__name__)

# Raw category spellings -> canonical label. Technique/Procedure/Type fold into
# Technique and History/Indications into History.
LABEL_MERGE_MAP: Dict[str, SectionLabel] = {
    "reason": SectionLabel.REASON,
    "reason for visit": SectionLabel.REASON,
    "reason for exam": SectionLabel.REASON,
    "history": SectionLabel.HISTORY,
    "indication": SectionLabel.HISTORY,
    "indications": SectionLabel.HISTORY,
    "comparison": SectionLabel.COMPARISON,
    "technique": SectionLabel.TECHNIQUE,
    "procedure": SectionLabel.TECHNIQUE,
    "type": SectionLabel.TECHNIQUE,
    "findings": SectionLabel.FINDINGS,
    "impression": SectionLabel.IMPRESSION,
    "others": SectionLabel.OTHERS,
    "other": SectionLabel.OTHERS,
}


def normalize_label_key(raw: str) -> str:
    return " ".join(re.sub(r"[_\-]+", " ", raw).lower().split())


def merge_label(raw: str, extra: Optional[Mapping[str, str]] = None) -> Optional[SectionLabel]:
    """Map a raw category name onto the canonical label set

    Args:
        raw (str): Raw category such as "Procedure" or "Reason_for_visit"
        extra (dict, optional): Additional raw spelling -> canonical label name

    Returns:
        SectionLabel or None: None when the spelling is unknown
    """
    key = normalize_label_key(raw)
    if extra:
        for spelling, target in extra.items():
            if normalize_label_key(spelling) == key:
                return merge_label(target)
    return LABEL_MERGE_MAP.get(key)


def _keyword_pattern(keyword: str) -> re.Pattern:
    words = [re.escape(word) for word in keyword.split()]
    # keyword, then a colon (optionally after whitespace) or the end of the sentence;
    # a lone terminal period ("IMPRESSION.") still counts as the end
    return re.compile(r"^" + r"\s+".join(words) + r"(?:\s*:|\s*\.?\s*$)", re.IGNORECASE)


class RuleSet(BaseModel):
    """Ordered header keywords with their canonical labels"""

    model_config = ConfigDict(frozen=True)

    name: str = "custom"
    header_patterns: Tuple[Tuple[str, SectionLabel], ...] = Field(min_length=1)
    match_mode: str = "line_start_case_insensitive"

    _compiled: List[Tuple[re.Pattern, SectionLabel]] = PrivateAttr(default_factory=list)

    @field_validator("header_patterns")
    @classmethod
    def _check_keywords(cls, value):
        for keyword, _ in value:
            if not keyword.strip():
                raise ValueError("Rule keywords must be non-empty")
        return value

    def model_post_init(self, __context) -> None:
        self._compiled = [(_keyword_pattern(keyword), label) for keyword, label in self.header_patterns]

    def match(self, text: str) -> Optional[SectionLabel]:
        """Label of the first rule whose keyword opens ``text``, if any"""
        stripped = text.strip()
        for pattern, label in self._compiled:
            if pattern.match(stripped):
                return label
        return None


def parse_rules(text: str, name: str = "custom", extra_merge_map: Optional[Mapping[str, str]] = None) -> RuleSet:
    """Parse a rule file with one ``keyword -> Label`` mapping per line

    Args:
        text (str): Rule file content; blank lines and # comments are ignored
        name (str): Name recorded on the RuleSet
        extra_merge_map (dict, optional): Additional label spellings

    Returns:
        RuleSet: The parsed rules in file order
    """
    patterns = []
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "->" not in line:
            raise ConfigError(f"Rule file {name}, line {line_no}: expected 'keyword -> Label'")
        keyword, raw_label = (part.strip() for part in line.split("->", 1))
        label = merge_label(raw_label, extra_merge_map)
        if not keyword or label is None:
            raise ConfigError(f"Rule file {name}, line {line_no}: cannot map {raw_label!r} to a section label")
        patterns.append((keyword, label))
    if not patterns:
        raise ConfigError(f"Rule file {name} contains no rules")
    return RuleSet(name=name, header_patterns=tuple(patterns))


def load_rules(name_or_path: str, extra_merge_map: Optional[Mapping[str, str]] = None) -> RuleSet:
    """Load a shipped rule set ("mgb", "mimic") or a rule file"""
    return parse_rules(load_rule_text(name_or_path), name=name_or_path, extra_merge_map=extra_merge_map)


def detect_headers(report: Report, rules: RuleSet) -> List[Tuple[int, SectionLabel]]:
    """Find header sentences in a segmented report

    Args:
        report (Report): Segmented report
        rules (RuleSet): Header keywords

    Returns:
        list: (sentence_index, label) pairs sorted by index
    """
    headers = []
    for sentence in report.sentences:
        label = rules.match(sentence.text)
        if label is not None:
            headers.append((sentence.index, label))
    return headers


def labels_from_headers(n_sentences: int, headers: List[Tuple[int, SectionLabel]]) -> List[SectionLabel]:
    """Spread header labels forward; sentences before the first header are Others"""
    labels = [SectionLabel.OTHERS] * n_sentences
    starts = dict(headers)
    current = SectionLabel.OTHERS
    for index in range(n_sentences):
        current = starts.get(index, current)
        labels[index] = current
    return labels


def weak_label(report: Report, rules: RuleSet) -> List[LabeledSentence]:
    """Label every sentence with the section of the closest preceding header

    Args:
        report (Report): Segmented report
        rules (RuleSet): Header keywords

    Returns:
        list: One weak LabeledSentence per sentence
    """
    labels = labels_from_headers(len(report.sentences), detect_headers(report, rules))
    return [
        LabeledSentence(sentence=sentence, label=label, source=LabelSource.WEAK)
        for sentence, label in zip(report.sentences, labels)
    ]
