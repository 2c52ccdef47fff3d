"""
Tests for the shared domain types and the dataset split
"""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from section_labeler.core_types import (AnnotatedReport, LabeledSentence, LabelSource, ProbVector, Report,
                                        ScoreVector, SectionLabel, Sentence, split_dataset, split_sizes)
from section_labeler.errors import ConfigError, EmptyCorpusError
from section_labeler.utils.text_processing import make_report


def test_label_codes_are_stable():
    assert [label.render() for label in SectionLabel] == [
        "Reason", "History", "Comparison", "Technique", "Findings", "Impression", "Others"]
    assert int(SectionLabel.REASON) == 0
    assert int(SectionLabel.OTHERS) == 6


def test_label_parse_is_case_insensitive():
    assert SectionLabel.parse("findings") is SectionLabel.FINDINGS
    assert SectionLabel.parse(" Impression ") is SectionLabel.IMPRESSION
    with pytest.raises(ValueError):
        SectionLabel.parse("Procedure")


def test_sentence_span_must_match_text():
    with pytest.raises(ValueError):
        Sentence(text="abc", begin=0, end=4, index=0)
    with pytest.raises(ValueError):
        Sentence(text="", begin=3, end=3, index=0)


def test_report_rejects_sentences_that_disagree_with_text():
    sentence = Sentence(text="Lungs", begin=0, end=5, index=0)
    with pytest.raises(ValueError):
        Report(id="r", raw_text="Heart clear.", sentences=[sentence])


def test_annotated_report_needs_one_label_per_sentence(sample_report):
    labels = [LabeledSentence(sentence=s, label=SectionLabel.OTHERS, source=LabelSource.GOLD)
              for s in sample_report.sentences[:-1]]
    with pytest.raises(ValueError):
        AnnotatedReport(report=sample_report, labels=labels)


def test_prob_vector_validates_distribution():
    ProbVector(p=(1 / 7,) * 7)
    with pytest.raises(ValueError):
        ProbVector(p=(0.5,) * 7)
    with pytest.raises(ValueError):
        ProbVector(p=(1.0,) * 6)
    assert ProbVector(p=(0, 0, 0, 0, 1, 0, 0)).argmax() is SectionLabel.FINDINGS


def test_score_vector_normalized_for_reporting():
    scores = ScoreVector(scores=(1, 1, 2, 0, 0, 0, 0))
    assert scores.normalized() == pytest.approx((0.25, 0.25, 0.5, 0, 0, 0, 0))
    assert ScoreVector(scores=(0,) * 7).normalized() == pytest.approx((1 / 7,) * 7)


def test_split_sizes_floor_holdout_and_test():
    assert split_sizes(856, (0.8, 0.1, 0.1)) == (686, 85, 85)
    assert split_sizes(10, (0.8, 0.1, 0.1)) == (8, 1, 1)
    assert split_sizes(5, (0.8, 0.1, 0.1)) == (5, 0, 0)


def test_split_rejects_bad_ratios():
    with pytest.raises(ConfigError):
        split_sizes(10, (0.5, 0.5))
    with pytest.raises(ConfigError):
        split_sizes(10, (0.9, 0.2, -0.1))
    with pytest.raises(ConfigError):
        split_sizes(10, (0.5, 0.3, 0.3))


def test_split_of_empty_corpus():
    with pytest.raises(EmptyCorpusError, match="empty corpus"):
        split_dataset([], (0.8, 0.1, 0.1), seed=0)


def _reports(n):
    return [make_report(f"r{i}", f"Report number {i}.") for i in range(n)]


@settings(max_examples=30, deadline=None)
@given(st.integers(min_value=1, max_value=60), st.integers(min_value=0, max_value=2 ** 16))
def test_split_is_a_partition(n, seed):
    reports = _reports(n)
    split = split_dataset(reports, (0.8, 0.1, 0.1), seed)
    ids = [r.id for part in (split.train, split.stacking_holdout, split.test) for r in part]
    assert sorted(ids) == sorted(r.id for r in reports)
    assert len(ids) == len(set(ids))
    assert (len(split.train), len(split.stacking_holdout), len(split.test)) == split_sizes(n, (0.8, 0.1, 0.1))


def test_split_is_deterministic_under_seed():
    reports = _reports(40)
    first = split_dataset(reports, (0.8, 0.1, 0.1), seed=7)
    second = split_dataset(reports, (0.8, 0.1, 0.1), seed=7)
    assert [r.id for r in first.test] == [r.id for r in second.test]
    other = split_dataset(reports, (0.8, 0.1, 0.1), seed=8)
    assert [r.id for r in first.train] != [r.id for r in other.train]
