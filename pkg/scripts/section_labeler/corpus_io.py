"""
Corpus ingestion and generation

Plain-text report directories, BRAT standoff annotations, the internal
line-delimited JSON labeled format, and a templated synthetic report
generator used for testing and the benchmark experiments.
"""

import json
import logging
import re
from pathlib import Path
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .core_types import AnnotatedReport, LabeledSentence, LabelSource, Report, SectionLabel, Sentence
from .errors import AnnotationError, ConfigError, EmptyCorpusError
from .utils.batch_processor import run_in_workers
from .utils.template_loader import load_synthetic_templates
from .utils.text_processing import make_report, segment_sentences
from .weak_labeler import RuleSet, merge_label, weak_label

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


# ---------------------------------------------------------------------------
# Plain text


def normalize_newlines(text: str) -> str:
    return text.replace("\r\n", "\n").replace("\r", "\n")


def _read_text(path: Path) -> str:
    try:
        with open(path, "r", encoding="utf-8", newline="") as f:
            return f.read()
    except OSError as e:
        raise EmptyCorpusError(f"Cannot read {path}: {e}") from e


def load_plain_reports(directory: PathLike) -> List[Report]:
    """Segment every ``*.txt`` file of a directory into a Report (id = file stem)"""
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyCorpusError(f"Not a directory: {directory}")
    reports = [make_report(path.stem, normalize_newlines(_read_text(path)))
               for path in sorted(directory.glob("*.txt"))]
    if not reports:
        raise EmptyCorpusError(f"No .txt reports in {directory}")
    return reports


def weak_labeled(reports: Sequence[Report], rules: RuleSet) -> List[AnnotatedReport]:
    return [AnnotatedReport(report=report, labels=weak_label(report, rules)) for report in reports]


# ---------------------------------------------------------------------------
# BRAT standoff


class StandoffAnnotation(BaseModel):
    """One text-bound annotation (``T`` line) of a .ann file"""

    model_config = ConfigDict(frozen=True)

    entity_id: str
    label: str
    begin: int = Field(ge=0)
    end: int
    text: str
    order: int = 0


_ENTITY_LINE = re.compile(r"^(T\d+)\t(\S+) (\d+ \d+(?:;\d+ \d+)*)\t?(.*)$")


def _normalized_offsets(raw_text: str) -> np.ndarray:
    """Map each offset of the stored text onto the newline-normalized text"""
    shift = np.zeros(len(raw_text) + 1, dtype=np.int64)
    removed = 0
    for i, ch in enumerate(raw_text):
        shift[i] = i - removed
        if ch == "\r" and i + 1 < len(raw_text) and raw_text[i + 1] == "\n":
            removed += 1
    shift[len(raw_text)] = len(raw_text) - removed
    return shift


def parse_ann(ann_text: str, raw_text: str, source: str = "<ann>") -> List[StandoffAnnotation]:
    """Parse the text-bound annotations of a .ann file against its document

    Offsets are validated against the newline-normalized document; fragmented
    spans (``b1 e1;b2 e2``) cover their first begin to their last end.

    Raises:
        AnnotationError: On malformed lines, out-of-range offsets or covered-text mismatches
    """
    text = normalize_newlines(raw_text)
    offset_map = _normalized_offsets(raw_text)
    annotations = []
    for line_no, line in enumerate(ann_text.splitlines(), start=1):
        if not line.strip() or not line.startswith("T"):
            continue
        m = _ENTITY_LINE.match(line.rstrip("\r\n"))
        if m is None:
            raise AnnotationError(f"{source}, line {line_no}: cannot parse annotation {line!r}")
        entity_id, label, spans, covered = m.groups()
        fragments = [tuple(int(v) for v in fragment.split()) for fragment in spans.split(";")]
        begin, end = fragments[0][0], fragments[-1][-1]
        if not 0 <= begin < end <= len(raw_text):
            raise AnnotationError(f"{source}, line {line_no}: offsets [{begin}, {end}) "
                                  f"outside a document of {len(raw_text)} characters")
        begin, end = int(offset_map[begin]), int(offset_map[end])
        # .ann lines cannot hold newlines, so covered text shows them as spaces
        if len(fragments) == 1 and covered.strip() and covered.strip() != text[begin:end].replace("\n", " ").strip():
            raise AnnotationError(
                f"{source}, line {line_no}: covered text does not match the document at [{begin}, {end})")
        annotations.append(StandoffAnnotation(entity_id=entity_id, label=label, begin=begin, end=end,
                                              text=covered, order=len(annotations)))
    return annotations


def align_annotations(report: Report, annotations: Sequence[StandoffAnnotation],
                      labels: Dict[str, SectionLabel]) -> List[LabeledSentence]:
    """Give each sentence the label of the annotation overlapping it most

    Equal overlaps go to the earlier annotation; sentences no annotation
    touches are Others.
    """
    ordered = sorted(annotations, key=lambda a: (a.begin, a.order))
    result = []
    for sentence in report.sentences:
        best, best_overlap = SectionLabel.OTHERS, 0
        for annotation in ordered:
            overlap = min(sentence.end, annotation.end) - max(sentence.begin, annotation.begin)
            if overlap > best_overlap:
                best, best_overlap = labels[annotation.label], overlap
        result.append(LabeledSentence(sentence=sentence, label=best, source=LabelSource.GOLD))
    return result


def _pair_files(directory: Path) -> List[Tuple[Path, Path]]:
    texts = {p.stem: p for p in directory.glob("*.txt")}
    anns = {p.stem: p for p in directory.glob("*.ann")}
    orphans = sorted(set(texts) ^ set(anns))
    if orphans:
        described = [f"{stem}.{'txt' if stem in texts else 'ann'}" for stem in orphans]
        raise AnnotationError(f"Unpaired files in {directory}: {', '.join(described)}")
    return [(texts[stem], anns[stem]) for stem in sorted(texts)]


def load_brat(directory: PathLike, extra_merge_map: Optional[Dict[str, str]] = None,
              max_workers: int = 1) -> List[AnnotatedReport]:
    """Load a BRAT directory of paired .txt/.ann files as gold-labeled reports

    Args:
        directory (str): Directory holding the pairs
        extra_merge_map (dict, optional): Extra label spellings -> canonical label
        max_workers (int): Files parsed concurrently

    Returns:
        list: One AnnotatedReport per document, in file-name order

    Raises:
        AnnotationError: Orphan files, bad offsets, or label strings the merge map cannot place
    """
    directory = Path(directory)
    if not directory.is_dir():
        raise EmptyCorpusError(f"Not a directory: {directory}")
    pairs = _pair_files(directory)
    if not pairs:
        raise EmptyCorpusError(f"No annotated documents in {directory}")

    def parse_pair(txt_path: Path, ann_path: Path):
        def job():
            raw = _read_text(txt_path)
            annotations = parse_ann(_read_text(ann_path), raw, source=ann_path.name)
            return make_report(txt_path.stem, normalize_newlines(raw)), annotations
        return job

    parsed = run_in_workers({txt.stem: parse_pair(txt, ann) for txt, ann in pairs}, max_workers)

    spellings = {a.label for _, annotations in parsed.values() for a in annotations}
    mapping = {spelling: merge_label(spelling, extra_merge_map) for spelling in spellings}
    unmapped = sorted(spelling for spelling, label in mapping.items() if label is None)
    if unmapped:
        raise AnnotationError(f"Unmapped annotation labels: {', '.join(unmapped)}")

    corpus = [AnnotatedReport(report=report, labels=align_annotations(report, annotations, mapping))
              for report, annotations in parsed.values()]
    logger.info("Loaded %d BRAT documents from %s", len(corpus), directory)
    return corpus


# ---------------------------------------------------------------------------
# Internal labeled format (one JSON record per sentence)


class SentenceRecord(BaseModel):
    """One line of the labeled JSONL format"""

    report_id: str
    index: int
    begin: int
    end: int
    text: str
    label: str
    source: LabelSource
    report_text: Optional[str] = Field(None, description="Full report text, carried by each report's first record.")


def write_labeled_jsonl(path: PathLike, corpus: Sequence[AnnotatedReport]) -> None:
    """Write one record per sentence; sentence 0 of each report carries the report text"""
    with open(path, "w", encoding="utf-8") as f:
        for item in corpus:
            report = item.report
            if not report.sentences:
                record = SentenceRecord(report_id=report.id, index=-1, begin=0, end=0, text="",
                                        label=SectionLabel.OTHERS.render(), source=LabelSource.GOLD,
                                        report_text=report.raw_text)
                f.write(record.model_dump_json() + "\n")
                continue
            for labeled in item.labels:
                sentence = labeled.sentence
                record = SentenceRecord(
                    report_id=report.id,
                    index=sentence.index,
                    begin=sentence.begin,
                    end=sentence.end,
                    text=sentence.text,
                    label=labeled.label.render(),
                    source=labeled.source,
                    report_text=report.raw_text if sentence.index == 0 else None,
                )
                f.write(record.model_dump_json() + "\n")


def read_labeled_jsonl(path: PathLike) -> List[AnnotatedReport]:
    """Read the labeled JSONL format back into annotated reports

    Raises:
        AnnotationError: On malformed records or records that disagree with their report text
    """
    grouped: Dict[str, List[SentenceRecord]] = {}
    texts: Dict[str, str] = {}
    try:
        with open(path, "r", encoding="utf-8") as f:
            for line_no, line in enumerate(f, start=1):
                if not line.strip():
                    continue
                try:
                    record = SentenceRecord.model_validate(json.loads(line))
                except (json.JSONDecodeError, ValidationError) as e:
                    raise AnnotationError(f"{path}, line {line_no}: {e}") from e
                grouped.setdefault(record.report_id, [])
                if record.report_text is not None:
                    texts[record.report_id] = record.report_text
                if record.index >= 0:
                    grouped[record.report_id].append(record)
    except OSError as e:
        raise EmptyCorpusError(f"Cannot read {path}: {e}") from e

    corpus = []
    for report_id, records in grouped.items():
        records.sort(key=lambda r: r.index)
        raw_text = texts.get(report_id)
        if raw_text is None:
            raise AnnotationError(f"{path}: report {report_id} has no record carrying its text")
        try:
            sentences = [Sentence(text=r.text, begin=r.begin, end=r.end, index=r.index) for r in records]
            report = Report(id=report_id, raw_text=raw_text, sentences=sentences)
            labels = [LabeledSentence(sentence=s, label=SectionLabel.parse(r.label), source=r.source)
                      for s, r in zip(sentences, records)]
        except ValueError as e:
            raise AnnotationError(f"{path}: report {report_id}: {e}") from e
        corpus.append(AnnotatedReport(report=report, labels=labels))
    return corpus


# ---------------------------------------------------------------------------
# Synthetic reports


class SyntheticSection(BaseModel):
    """One section of a template: header spellings, rendering style and sentence bank"""

    label: SectionLabel
    headers: List[str] = Field(min_length=1, description="First entry is the canonical spelling.")
    style: Literal["line", "inline", "bare"] = "line"
    bank: str
    min_sentences: int = Field(1, ge=1)
    max_sentences: int = Field(3, ge=1)
    probability: float = Field(1.0, ge=0, le=1, description="Chance the section appears at all.")

    @model_validator(mode="before")
    @classmethod
    def _parse_label(cls, data):
        if isinstance(data, dict) and isinstance(data.get("label"), str):
            data = {**data, "label": SectionLabel.parse(data["label"])}
        return data

    @model_validator(mode="after")
    def _check_counts(self) -> "SyntheticSection":
        if self.max_sentences < self.min_sentences:
            raise ValueError(f"{self.label.render()}: max_sentences below min_sentences")
        return self


class SyntheticTemplate(BaseModel):
    """Ordered sections plus noise knobs for one family of reports"""

    name: str
    sections: List[SyntheticSection] = Field(min_length=1)
    header_dropout: float = Field(0.0, ge=0, le=1)
    synonym_rate: float = Field(0.0, ge=0, le=1)
    casing_jitter: bool = False
    leading_others: float = Field(0.5, ge=0, le=1, description="Chance of a header-less Others block first.")
    others_bank: str = "others"
    newline_rate: float = Field(0.3, ge=0, le=1, description="Chance a body sentence starts a new line.")


class SyntheticTemplates(BaseModel):
    families: Dict[str, SyntheticTemplate]
    banks: Dict[str, List[str]]

    @model_validator(mode="before")
    @classmethod
    def _name_families(cls, data):
        if isinstance(data, dict) and isinstance(data.get("families"), dict):
            data = {**data, "families": {name: {"name": name, **(body or {})}
                                         for name, body in data["families"].items()}}
        return data

    @model_validator(mode="after")
    def _check_banks(self) -> "SyntheticTemplates":
        for family in self.families.values():
            needed = {section.bank for section in family.sections}
            if family.leading_others > 0:
                needed.add(family.others_bank)
            for bank in needed:
                if not self.banks.get(bank):
                    raise ValueError(f"Family {family.name}: sentence bank {bank!r} is missing or empty")
        for bank, sentences in self.banks.items():
            for sentence in sentences:
                segmented = segment_sentences(sentence)
                if len(segmented) != 1 or segmented[0].text != sentence or not sentence.endswith("."):
                    raise ValueError(f"Bank {bank}: {sentence!r} must be a single sentence ending with a period")
        return self


def parse_synthetic_templates(data: dict) -> SyntheticTemplates:
    try:
        return SyntheticTemplates.model_validate(data)
    except ValidationError as e:
        raise ConfigError(f"Invalid synthetic templates: {e}") from e


def _jitter_case(header: str, rng: np.random.Generator) -> str:
    style = int(rng.integers(4))
    if style == 0:
        return header.upper()
    if style == 1:
        return header.title()
    if style == 2:
        return header.lower()
    return header


def _render_report(template: SyntheticTemplate, banks: Dict[str, List[str]], rng: np.random.Generator,
                   header_dropout: float, casing_jitter: bool) -> Tuple[str, List[SectionLabel]]:
    lines: List[str] = []
    labels: List[SectionLabel] = []

    def add_body(bank: str, count: int, label: SectionLabel, first_line: Optional[str]) -> None:
        picks = rng.choice(len(banks[bank]), size=count, replace=count > len(banks[bank]))
        current = first_line
        for pick in picks:
            sentence = banks[bank][int(pick)]
            if current is None:
                current = sentence
            elif rng.random() < template.newline_rate:
                lines.append(current)
                current = sentence
            else:
                current = f"{current} {sentence}"
            labels.append(label)
        if current is not None:
            lines.append(current)

    if template.leading_others > 0 and rng.random() < template.leading_others:
        add_body(template.others_bank, int(rng.integers(1, 3)), SectionLabel.OTHERS, None)
        lines.append("")

    for section in template.sections:
        if rng.random() >= section.probability:
            continue
        count = int(rng.integers(section.min_sentences, section.max_sentences + 1))
        keep_header = rng.random() >= header_dropout
        header_line = None
        if keep_header:
            use_synonym = len(section.headers) > 1 and rng.random() < template.synonym_rate
            header = section.headers[int(rng.integers(1, len(section.headers)))] if use_synonym else section.headers[0]
            if casing_jitter:
                header = _jitter_case(header, rng)
            labels.append(section.label)
            if section.style == "bare":
                lines.append(header)
            elif section.style == "inline":
                header_line = f"{header}:"
            else:
                lines.append(f"{header}:")
        add_body(section.bank, count, section.label, header_line)
        lines.append("")
    return "\n".join(lines).strip("\n") + "\n", labels


def generate_synthetic_corpus(templates: Optional[SyntheticTemplates] = None, n_reports: int = 100,
                              seed: int = 0, family: str = "default",
                              header_dropout: Optional[float] = None,
                              casing_jitter: Optional[bool] = None) -> List[AnnotatedReport]:
    """Generate gold-labeled reports from a template family

    Args:
        templates (SyntheticTemplates, optional): Defaults to the shipped template file
        n_reports (int): Number of reports
        seed (int): Seed for every random choice
        family (str): Template family name ("default", "shifted", ...)
        header_dropout (float, optional): Overrides the family's header dropout
        casing_jitter (bool, optional): Overrides the family's casing jitter

    Returns:
        list: AnnotatedReport objects with gold labels (ids synth-<family>-<n>)
    """
    if n_reports < 1:
        raise ConfigError(f"n_reports must be at least 1, got {n_reports}")
    templates = templates or parse_synthetic_templates(load_synthetic_templates())
    if family not in templates.families:
        raise ConfigError(f"Unknown synthetic family {family!r}; available: {', '.join(sorted(templates.families))}")
    template = templates.families[family]
    dropout = template.header_dropout if header_dropout is None else header_dropout
    jitter = template.casing_jitter if casing_jitter is None else casing_jitter

    rng = np.random.default_rng(seed)
    corpus = []
    for n in range(n_reports):
        text, labels = _render_report(template, templates.banks, rng, dropout, jitter)
        report = make_report(f"synth-{family}-{n:05d}", text)
        if len(report.sentences) != len(labels):
            raise ConfigError(f"Family {family}: a template sentence does not segment as one sentence "
                              f"({len(report.sentences)} sentences for {len(labels)} labels)")
        corpus.append(AnnotatedReport(
            report=report,
            labels=[LabeledSentence(sentence=s, label=label, source=LabelSource.GOLD)
                    for s, label in zip(report.sentences, labels)],
        ))
    return corpus


# ---------------------------------------------------------------------------


def load_corpus(path: PathLike, rules: Optional[RuleSet] = None,
                extra_merge_map: Optional[Dict[str, str]] = None, max_workers: int = 1) -> List[AnnotatedReport]:
    """Load labeled reports from a JSONL file, a BRAT directory or a plain-text directory

    Plain-text reports are weak-labeled with ``rules``.
    """
    path = Path(path)
    if path.is_file():
        corpus = read_labeled_jsonl(path)
    elif path.is_dir() and any(path.glob("*.ann")):
        corpus = load_brat(path, extra_merge_map, max_workers)
    elif path.is_dir():
        if rules is None:
            raise ConfigError(f"{path} holds unlabeled reports; a rule set is needed to weak-label them")
        corpus = weak_labeled(load_plain_reports(path), rules)
    else:
        raise EmptyCorpusError(f"No corpus at {path}")
    if not corpus:
        raise EmptyCorpusError(f"empty corpus at {path}")
    return corpus
