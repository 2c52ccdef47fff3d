"""
Formatting and layout features for the layout model

Seventeen numbers per sentence, read from the raw (uncleaned) sentence
text and the report's detected headers:

    0-2    uppercase, lowercase and digit fractions of the sentence length
    3-8    signed position relative to the first Reason, History, Technique,
           Comparison, Findings and Impression header, over the sentence count
           (ABSENT_HEADER when that header does not occur)
    9-14   previous/current/next sentence ends with a period, ends with a colon
    15     position of the sentence in the report, scaled to [0, 1]
    16     first token is all-uppercase
"""

from typing import Dict, Sequence, Tuple

import numpy as np

from ..core_types import Report, SectionLabel

FEATURE_VERSION = 1
NUM_LAYOUT_FEATURES = 17
ABSENT_HEADER = 2.0

HEADER_ORDER = (
    SectionLabel.REASON,
    SectionLabel.HISTORY,
    SectionLabel.TECHNIQUE,
    SectionLabel.COMPARISON,
    SectionLabel.FINDINGS,
    SectionLabel.IMPRESSION,
)

FEATURE_NAMES = (
    "upper_frac", "lower_frac", "digit_frac",
    *(f"rel_pos_to_{label.render().lower()}" for label in HEADER_ORDER),
    "prev_ends_period", "prev_ends_colon",
    "cur_ends_period", "cur_ends_colon",
    "next_ends_period", "next_ends_colon",
    "norm_pos",
    "first_token_upper",
)


def character_counts(text: str) -> Tuple[int, int, int]:
    upper = sum(1 for ch in text if ch.isascii() and ch.isupper())
    lower = sum(1 for ch in text if ch.isascii() and ch.islower())
    digits = sum(1 for ch in text if ch.isascii() and ch.isdigit())
    return upper, lower, digits


def first_token_upper(text: str) -> bool:
    tokens = text.split()
    if not tokens:
        return False
    letters = [ch for ch in tokens[0] if ch.isalpha()]
    return bool(letters) and all(ch.isupper() for ch in letters)


def _endings(text: str) -> Tuple[float, float]:
    text = text.rstrip()
    return float(text.endswith(".")), float(text.endswith(":"))


def first_header_positions(headers: Sequence[Tuple[int, SectionLabel]]) -> Dict[SectionLabel, int]:
    """Index of the first occurrence of each header label"""
    positions: Dict[SectionLabel, int] = {}
    for index, label in sorted(headers):
        positions.setdefault(SectionLabel(label), index)
    return positions


def extract_layout_features(report: Report, focus_index: int,
                            headers: Sequence[Tuple[int, SectionLabel]],
                            raw_counts: bool = False) -> np.ndarray:
    """Compute the 17 layout features of one sentence

    Args:
        report (Report): Segmented report
        focus_index (int): Index of the sentence to describe
        headers (list): (sentence_index, label) pairs from detect_headers
        raw_counts (bool): Keep character counts unnormalized

    Returns:
        numpy.ndarray: float32 vector of length 17, in FEATURE_NAMES order
    """
    sentences = report.sentences
    n = len(sentences)
    if not 0 <= focus_index < n:
        raise IndexError(f"Sentence index {focus_index} out of range for report {report.id} with {n} sentences")
    text = sentences[focus_index].text

    features = np.zeros(NUM_LAYOUT_FEATURES, dtype=np.float32)
    counts = np.array(character_counts(text), dtype=np.float64)
    features[0:3] = counts if raw_counts else counts / max(len(text), 1)

    positions = first_header_positions(headers)
    for slot, label in enumerate(HEADER_ORDER):
        header_index = positions.get(label)
        features[3 + slot] = ABSENT_HEADER if header_index is None else (focus_index - header_index) / n

    for slot, neighbor in enumerate((focus_index - 1, focus_index, focus_index + 1)):
        if 0 <= neighbor < n:
            features[9 + 2 * slot:11 + 2 * slot] = _endings(sentences[neighbor].text)

    features[15] = focus_index / max(n - 1, 1)
    features[16] = float(first_token_upper(text))
    return features
