"""
Tests for BRAT loading, the labeled JSONL format and the synthetic generator
"""

import pytest

from section_labeler.core_types import AnnotatedReport, LabelSource, SectionLabel
from section_labeler.corpus_io import (generate_synthetic_corpus, load_brat, load_corpus, load_plain_reports,
                                       parse_ann, read_labeled_jsonl, write_labeled_jsonl)
from section_labeler.errors import AnnotationError, ConfigError, EmptyCorpusError
from section_labeler.utils.text_processing import make_report
from section_labeler.weak_labeler import weak_label

F, I, O = SectionLabel.FINDINGS, SectionLabel.IMPRESSION, SectionLabel.OTHERS


def long_report():
    text = "Note.".ljust(399) + "\n"
    text += "Findings:".ljust(49) + "\n"
    text += "Lungs clear.".ljust(249) + "\n"
    text += "Stable.\n"
    return text


def write_pair(directory, stem, text, ann):
    with open(directory / f"{stem}.txt", "w", encoding="utf-8", newline="") as f:
        f.write(text)
    (directory / f"{stem}.ann").write_text(ann, encoding="utf-8")


def test_brat_section_span_covers_inner_sentences(tmp_path):
    write_pair(tmp_path, "r1", long_report(), "T1\tFindings 400 700\t\nT2\tImpression 700 708\tStable.\n")
    corpus = load_brat(tmp_path)
    assert len(corpus) == 1
    report = corpus[0].report
    assert [s.begin for s in report.sentences] == [0, 400, 450, 700]
    assert corpus[0].label_codes == [int(O), int(F), int(F), int(I)]
    assert all(item.source is LabelSource.GOLD for item in corpus[0].labels)


def test_brat_windows_newlines(tmp_path):
    raw = "Findings:\r\nLungs clear.\r\n"
    write_pair(tmp_path, "crlf", raw, "T1\tFindings 0 23\tFindings: Lungs clear.\n")
    item = load_brat(tmp_path)[0]
    assert "\r" not in item.report.raw_text
    assert [s.text for s in item.report.sentences] == ["Findings:", "Lungs clear."]
    assert item.label_codes == [int(F), int(F)]


def test_raw_category_names_are_merged(tmp_path):
    write_pair(tmp_path, "p", "Procedure: CT head.\n", "T1\tProcedure 0 19\tProcedure: CT head.\n")
    assert load_brat(tmp_path)[0].labels[0].label is SectionLabel.TECHNIQUE


def test_orphan_files_are_rejected(tmp_path):
    write_pair(tmp_path, "ok", "Stable.\n", "T1\tImpression 0 7\tStable.\n")
    (tmp_path / "lonely.txt").write_text("Lungs clear.\n", encoding="utf-8")
    with pytest.raises(AnnotationError, match="lonely.txt"):
        load_brat(tmp_path)


def test_unmapped_labels_are_rejected(tmp_path):
    write_pair(tmp_path, "a", "Addendum text.\n", "T1\tAddendum 0 14\tAddendum text.\n")
    with pytest.raises(AnnotationError, match="Addendum"):
        load_brat(tmp_path)
    assert load_brat(tmp_path, extra_merge_map={"Addendum": "Others"})[0].labels[0].label is O


@pytest.mark.parametrize("ann", [
    "T1\tFindings 0 99\t\n",
    "T1\tFindings 5 2\t\n",
    "T1 Findings zero five\n",
    "T1\tFindings 0 7\tSomething else\n",
])
def test_bad_annotation_lines(ann):
    with pytest.raises(AnnotationError):
        parse_ann(ann, "Stable.\n")


def test_fragmented_span_and_non_entity_lines():
    ann = "T1\tFindings 0 3;4 7\tSta ble\n#1\tAnnotatorNotes T1\tnote\nR1\tRel Arg1:T1 Arg2:T1\n"
    (annotation,) = parse_ann(ann, "Stable.\n")
    assert (annotation.begin, annotation.end) == (0, 7)


def test_jsonl_round_trip(tmp_path, small_corpus):
    corpus = list(small_corpus) + [AnnotatedReport(report=make_report("empty", ""), labels=[])]
    path = tmp_path / "corpus.jsonl"
    write_labeled_jsonl(path, corpus)
    loaded = read_labeled_jsonl(path)
    assert [item.report.id for item in loaded] == [item.report.id for item in corpus]
    for original, restored in zip(corpus, loaded):
        assert restored.report.raw_text == original.report.raw_text
        assert restored.report.sentences == original.report.sentences
        assert restored.label_codes == original.label_codes


def test_jsonl_rejects_malformed_records(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"report_id": "r", "index": 0}\n', encoding="utf-8")
    with pytest.raises(AnnotationError):
        read_labeled_jsonl(path)
    path.write_text('{"report_id": "r", "index": 0, "begin": 0, "end": 3, "text": "abc", '
                    '"label": "Findings", "source": "gold"}\n', encoding="utf-8")
    with pytest.raises(AnnotationError, match="no record carrying its text"):
        read_labeled_jsonl(path)


def test_synthetic_corpus_is_deterministic():
    first = generate_synthetic_corpus(n_reports=5, seed=7)
    second = generate_synthetic_corpus(n_reports=5, seed=7)
    other = generate_synthetic_corpus(n_reports=5, seed=8)
    assert [r.report.raw_text for r in first] == [r.report.raw_text for r in second]
    assert [r.report.raw_text for r in first] != [r.report.raw_text for r in other]
    assert first[0].report.id == "synth-default-00000"
    assert all(len(item.labels) == len(item.report.sentences) for item in first)


def test_shifted_family_and_errors():
    shifted = generate_synthetic_corpus(n_reports=3, seed=0, family="shifted")
    assert shifted[2].report.id == "synth-shifted-00002"
    with pytest.raises(ConfigError):
        generate_synthetic_corpus(n_reports=3, family="pediatric")
    with pytest.raises(ConfigError):
        generate_synthetic_corpus(n_reports=0)


def test_full_header_dropout_leaves_nothing_for_rules(mgb_rules):
    for item in generate_synthetic_corpus(n_reports=20, seed=2, header_dropout=1.0):
        assert all(labeled.label is O for labeled in weak_label(item.report, mgb_rules))


def test_load_corpus_dispatch(tmp_path, mgb_rules, small_corpus):
    jsonl = tmp_path / "corpus.jsonl"
    write_labeled_jsonl(jsonl, small_corpus)
    assert len(load_corpus(jsonl)) == len(small_corpus)

    brat = tmp_path / "brat"
    brat.mkdir()
    write_pair(brat, "r1", "Stable.\n", "T1\tImpression 0 7\tStable.\n")
    assert load_corpus(brat)[0].labels[0].label is I

    plain = tmp_path / "plain"
    plain.mkdir()
    (plain / "a.txt").write_text("Findings: Lungs clear.\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        load_corpus(plain)
    weak = load_corpus(plain, rules=mgb_rules)
    assert weak[0].label_codes == [int(F), int(F)]
    assert weak[0].labels[0].source is LabelSource.WEAK
    assert load_plain_reports(plain)[0].id == "a"

    with pytest.raises(EmptyCorpusError):
        load_corpus(tmp_path / "missing")
