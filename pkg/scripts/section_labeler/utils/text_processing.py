"""
Utility functions for text processing in section labeling

Character cleaning, rule-based sentence segmentation, vocabulary building
and word-level tokenization.
"""

import hashlib
import re
from collections import Counter
from pathlib import Path
from typing import Dict, Iterable, List, Sequence, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core_types import Report, Sentence

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

_NON_ALNUM = re.compile(r"[^A-Za-z0-9]")
_BOUNDARY_PUNCT = ".:"


def clean_text(text: str) -> str:
    """Replace every character that is not an ASCII letter or digit with a space

    Args:
        text (str): Input text (may be empty)

    Returns:
        str: Text of the same length containing only letters, digits and spaces
    """
    return _NON_ALNUM.sub(" ", text)


def _trimmed_span(text: str, start: int, end: int) -> Tuple[int, int]:
    while start < end and text[start].isspace():
        start += 1
    while end > start and text[end - 1].isspace():
        end -= 1
    return start, end


def segment_sentences(raw_text: str) -> List[Sentence]:
    """Split report text into sentences with character offsets

    Boundaries fall at newlines and at a period or colon that is followed by
    whitespace or the end of the text; the delimiter stays with the preceding
    sentence. Spans are trimmed and empty spans dropped.

    Args:
        raw_text (str): The report text

    Returns:
        list: Sentences in order of appearance
    """
    spans = []
    start = 0
    n = len(raw_text)
    for i, ch in enumerate(raw_text):
        if ch == "\n":
            spans.append((start, i))
            start = i + 1
        elif ch in _BOUNDARY_PUNCT and (i + 1 == n or raw_text[i + 1].isspace()):
            spans.append((start, i + 1))
            start = i + 1
    spans.append((start, n))

    sentences = []
    for span_start, span_end in spans:
        begin, end = _trimmed_span(raw_text, span_start, span_end)
        if begin < end:
            sentences.append(
                Sentence(text=raw_text[begin:end], begin=begin, end=end, index=len(sentences))
            )
    return sentences


def make_report(report_id: str, raw_text: str) -> Report:
    """Build a segmented Report from raw text"""
    return Report(id=report_id, raw_text=raw_text, sentences=segment_sentences(raw_text))


def word_tokens(text: str) -> List[str]:
    """Lowercased whitespace tokens of the cleaned text"""
    return clean_text(text.lower()).split()


class Vocabulary:
    """Immutable token <-> id mapping with PAD=0 and UNK=1 reserved"""

    def __init__(self, tokens: Sequence[str] = ()):
        self._tokens: Tuple[str, ...] = (PAD_TOKEN, UNK_TOKEN) + tuple(tokens)
        self._index: Dict[str, int] = {token: i for i, token in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise ValueError("Vocabulary tokens must be unique")

    def __len__(self) -> int:
        return len(self._tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def __eq__(self, other) -> bool:
        return isinstance(other, Vocabulary) and self._tokens == other._tokens

    def __hash__(self) -> int:
        return hash(self._tokens)

    @property
    def tokens(self) -> Tuple[str, ...]:
        """Tokens with ids >= 2, in id order"""
        return self._tokens[2:]

    def id_of(self, token: str) -> int:
        return self._index.get(token, UNK_ID)

    def token_of(self, token_id: int) -> str:
        return self._tokens[token_id]

    def content_hash(self) -> str:
        """SHA-256 over the token list, used to pair bundles with vocabularies"""
        digest = hashlib.sha256()
        for token in self._tokens:
            digest.update(token.encode("utf-8"))
            digest.update(b"\n")
        return digest.hexdigest()

    def save(self, path: Union[str, Path]) -> None:
        """Write one token per line; line number = id - 2"""
        with open(path, "w", encoding="utf-8") as f:
            for token in self.tokens:
                f.write(token + "\n")

    @classmethod
    def load(cls, path: Union[str, Path]) -> "Vocabulary":
        with open(path, "r", encoding="utf-8") as f:
            return cls([line.rstrip("\n") for line in f if line.rstrip("\n")])


def build_vocab(corpus: Iterable[Report], min_count: int = 1) -> Vocabulary:
    """Build a vocabulary from the sentences of a corpus

    Args:
        corpus (list): Reports whose sentences are counted
        min_count (int): Minimum frequency for a token to receive an id

    Returns:
        Vocabulary: Ids ordered by descending frequency, then lexicographically
    """
    if min_count < 1:
        raise ValueError(f"min_count must be >= 1, got {min_count}")
    counts = Counter()
    for report in corpus:
        for sentence in report.sentences:
            counts.update(word_tokens(sentence.text))
    kept = [token for token, count in counts.items() if count >= min_count]
    kept.sort(key=lambda token: (-counts[token], token))
    return Vocabulary(kept)


class TokenizedSentence(BaseModel):
    """Tokens and ids for a sentence, keeping the untouched original"""

    model_config = ConfigDict(frozen=True)

    tokens: Tuple[str, ...]
    token_ids: Tuple[int, ...] = Field(min_length=1)
    raw: Sentence

    @model_validator(mode="after")
    def _check_lengths(self) -> "TokenizedSentence":
        if self.tokens and len(self.tokens) != len(self.token_ids):
            raise ValueError("tokens and token_ids must have equal length")
        return self


def tokenize(sentence: Sentence, vocab: Vocabulary) -> TokenizedSentence:
    """Map a sentence to word tokens and vocabulary ids

    Args:
        sentence (Sentence): Sentence to tokenize
        vocab (Vocabulary): Vocabulary used for the id lookup

    Returns:
        TokenizedSentence: Unknown words map to UNK; an empty sentence maps to [PAD]
    """
    tokens = word_tokens(sentence.text)
    ids = tuple(vocab.id_of(token) for token in tokens) or (PAD_ID,)
    return TokenizedSentence(tokens=tuple(tokens), token_ids=ids, raw=sentence)


def token_ids(text: str, vocab: Vocabulary) -> List[int]:
    """Ids for a bare string, following the PAD convention for empty text"""
    return [vocab.id_of(token) for token in word_tokens(text)] or [PAD_ID]
