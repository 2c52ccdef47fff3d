"""
Tests for the layout features, example building and the classifier architectures
"""

import dataclasses
import re

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from section_labeler.core_types import SectionLabel
from section_labeler.corpus_io import generate_synthetic_corpus
from section_labeler.embeddings import random_embeddings
from section_labeler.models import build_examples, create_model, create_models
from section_labeler.models.base import UNLABELED
from section_labeler.models.layout_features import (ABSENT_HEADER, FEATURE_NAMES, NUM_LAYOUT_FEATURES,
                                                    extract_layout_features)
from section_labeler.utils.text_processing import PAD_ID, make_report
from section_labeler.weak_labeler import detect_headers, load_rules

HEADER_ORDER = ("REASON", "HISTORY", "TECHNIQUE", "COMPARISON", "FINDINGS", "IMPRESSION")
FUZZ_RULES = load_rules("mgb")


def oracle_features(report, i, headers):
    """Straightforward re-derivation of the layout features"""
    sentences = [s.text for s in report.sentences]
    n = len(sentences)
    text = sentences[i]
    size = max(len(text), 1)
    row = [len(re.findall(r"[A-Z]", text)) / size,
           len(re.findall(r"[a-z]", text)) / size,
           len(re.findall(r"[0-9]", text)) / size]
    first = {}
    for index, label in sorted(headers):
        first.setdefault(label.name, index)
    row += [(i - first[name]) / n if name in first else 2.0 for name in HEADER_ORDER]
    for j in (i - 1, i, i + 1):
        neighbor = sentences[j].rstrip() if 0 <= j < n else ""
        row += [float(neighbor[-1:] == "."), float(neighbor[-1:] == ":")]
    row.append(i / (n - 1) if n > 1 else 0.0)
    words = text.split()
    letters = re.sub(r"[^A-Za-z]", "", words[0]) if words else ""
    row.append(float(letters.isupper()))
    return np.array(row)


def test_feature_names_cover_every_slot():
    assert len(FEATURE_NAMES) == NUM_LAYOUT_FEATURES == 17


def test_header_sentence_features(mgb_rules):
    report = make_report("r", "Note.\nFINDINGS:\nLungs clear.")
    features = extract_layout_features(report, 1, detect_headers(report, mgb_rules))
    assert features.dtype == np.float32
    assert features[0] == pytest.approx(8 / 9)
    assert features[1] == 0.0
    assert features[2] == 0.0
    assert features[FEATURE_NAMES.index("cur_ends_colon")] == 1.0
    assert features[FEATURE_NAMES.index("cur_ends_period")] == 0.0
    assert features[FEATURE_NAMES.index("prev_ends_period")] == 1.0
    assert features[FEATURE_NAMES.index("next_ends_period")] == 1.0
    assert features[16] == 1.0


def test_relative_header_position(mgb_rules):
    text = ("Note one.\nNote two.\nFindings:\nLungs clear.\nHeart normal.\nNo effusion.\n"
            "Bones intact.\nNo mass.\nTubes fine.\nStable.")
    report = make_report("r", text)
    assert len(report.sentences) == 10
    features = extract_layout_features(report, 4, detect_headers(report, mgb_rules))
    assert features[FEATURE_NAMES.index("rel_pos_to_findings")] == pytest.approx(0.2)
    others = [name for name in FEATURE_NAMES if name.startswith("rel_pos") and name != "rel_pos_to_findings"]
    assert all(features[FEATURE_NAMES.index(name)] == ABSENT_HEADER for name in others)
    assert features[15] == pytest.approx(4 / 9)


def test_first_occurrence_of_repeated_header_counts(mgb_rules):
    report = make_report("r", "Findings:\nA.\nFindings:\nB.")
    features = extract_layout_features(report, 3, detect_headers(report, mgb_rules))
    assert features[FEATURE_NAMES.index("rel_pos_to_findings")] == pytest.approx(3 / 4)


def test_raw_character_counts(mgb_rules):
    report = make_report("r", "CT 2 views.")
    features = extract_layout_features(report, 0, [], raw_counts=True)
    assert features[:3].tolist() == [2.0, 5.0, 1.0]


def test_feature_index_out_of_range(sample_report):
    with pytest.raises(IndexError):
        extract_layout_features(sample_report, len(sample_report.sentences), [])


def test_features_match_oracle_on_fixtures(mgb_rules):
    checked = 0
    for item in generate_synthetic_corpus(n_reports=20, seed=21):
        headers = detect_headers(item.report, mgb_rules)
        for i in range(len(item.report.sentences)):
            expected = oracle_features(item.report, i, headers)
            assert np.allclose(extract_layout_features(item.report, i, headers), expected, atol=1e-6)
            checked += 1
    assert checked >= 100


def assert_feature_ranges(f):
    assert np.all(np.isfinite(f))
    assert np.all((f[:3] >= 0) & (f[:3] <= 1)) and f[:3].sum() <= 1 + 1e-6
    rel = f[3:9]
    assert np.all(((rel >= -1) & (rel <= 1)) | (rel == ABSENT_HEADER))
    assert set(np.unique(f[9:15])).issubset({0.0, 1.0})
    assert 0.0 <= f[15] <= 1.0
    assert f[16] in (0.0, 1.0)


@settings(max_examples=200, deadline=None)
@given(st.text(alphabet=st.sampled_from(list("aZ9 .:\n-Findings")), min_size=1, max_size=120))
def test_feature_ranges_on_fuzzed_reports(text):
    report = make_report("fuzz", text)
    headers = detect_headers(report, FUZZ_RULES)
    for i in range(len(report.sentences)):
        assert_feature_ranges(extract_layout_features(report, i, headers))


FUZZ_WORDS = ("FINDINGS", "Impression", "history", "Technique", "reason", "for", "exam", "CT", "lungs",
              "clear", "2", "10mm", "L4-L5", "No", "a", "x", "", "-", "(", ")", "T2/FLAIR")


@pytest.mark.slow
def test_feature_ranges_on_ten_thousand_sentences():
    rng = np.random.default_rng(2024)
    checked = 0
    while checked < 10_000:
        lines = []
        for _ in range(int(rng.integers(1, 16))):
            words = rng.choice(FUZZ_WORDS, size=int(rng.integers(1, 9)))
            if rng.random() < 0.3:
                words = [word.upper() for word in words]
            lines.append(" ".join(words) + str(rng.choice(["", ".", ":", " :", ". More text."])))
        report = make_report(f"fuzz-{checked}", rng.choice(["\n", "\n\n", " "]).join(lines))
        headers = detect_headers(report, FUZZ_RULES)
        for i in range(len(report.sentences)):
            assert_feature_ranges(extract_layout_features(report, i, headers))
        checked += len(report.sentences)


def test_build_examples_neighbors(sample_report, small_vocab, mgb_rules):
    examples = build_examples(sample_report, small_vocab, mgb_rules)
    assert len(examples) == len(sample_report.sentences)
    assert examples[0].prev_ids == (PAD_ID,)
    assert examples[-1].next_ids == (PAD_ID,)
    assert examples[1].prev_ids == examples[0].focus_ids
    assert examples[1].next_ids == examples[2].focus_ids
    assert all(e.label == UNLABELED for e in examples)
    with pytest.raises(ValueError):
        build_examples(sample_report, small_vocab, mgb_rules, [SectionLabel.OTHERS])


# non-embedding parameters for 8-dimensional word vectors
EXPECTED_PARAMETERS = {
    "focus": 2 * (8 * 256 + 64 * 256 + 256) + (256 * 100 + 100) + (100 * 30 + 30) + (30 * 16 + 16) + (16 * 7 + 7),
    "surrounding": (2 * (8 * 256 + 64 * 256 + 256) + 2 * 2 * (8 * 64 + 16 * 64 + 64)
                    + (192 * 50 + 50) + (50 * 10 + 10) + (10 * 7 + 7)),
    "layout": (17 * 100 + 100) + (100 * 16 + 16) + (16 * 7 + 7),
}


def test_parameter_counts_with_frozen_embeddings(small_vocab):
    table = random_embeddings(small_vocab, dim=8, seed=0, trainable=False)
    counts = {name: create_model(name, table).parameter_count() for name in ("focus", "surrounding", "layout")}
    assert counts == EXPECTED_PARAMETERS
    merged = create_model("merged", table).parameter_count()
    trunks = (EXPECTED_PARAMETERS["focus"] - 119) + (EXPECTED_PARAMETERS["surrounding"] - 77) \
        + (EXPECTED_PARAMETERS["layout"] - 119)
    assert merged == trunks + 42 * 7 + 7


def test_trainable_embeddings_add_one_table_per_model(small_vocab):
    table = random_embeddings(small_vocab, dim=8, seed=0, trainable=True)
    extra = len(small_vocab) * 8
    assert create_model("focus", table).parameter_count() == EXPECTED_PARAMETERS["focus"] + extra
    merged = create_model("merged", table)
    assert "focus.embedding.E" in merged.named_parameters()
    assert "surrounding.embedding.E" in merged.named_parameters()


def test_models_do_not_share_trainable_tables(fast_config, small_vocab):
    table = random_embeddings(small_vocab, dim=8, seed=0, trainable=True)
    models = create_models(fast_config, table)
    focus_table = models["focus"].layers["embedding"].table.vectors
    surrounding_table = models["surrounding"].layers["embedding"].table.vectors
    assert focus_table is not surrounding_table
    assert focus_table is not table.vectors


def test_output_shapes_and_distributions(small_examples, trainable_table):
    for name in ("focus", "surrounding", "layout", "merged"):
        probs = create_model(name, trainable_table, seed=1).predict_proba(small_examples[:9])
        assert probs.shape == (9, 7)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-5)
        assert np.all(probs >= 0)


def test_empty_neighbors_are_handled(small_vocab, mgb_rules, trainable_table):
    report = make_report("single", "Lungs clear.")
    examples = build_examples(report, small_vocab, mgb_rules)
    probs = create_model("surrounding", trainable_table).predict_proba(examples)
    assert probs.shape == (1, 7)


def test_swapping_neighbors_changes_surrounding_output(small_examples, trainable_table):
    model = create_model("surrounding", trainable_table, seed=4)
    # make the two neighbor branches clearly different
    for name, value in model.named_parameters().items():
        if name.startswith("lstm_prev."):
            value *= 3.0
    examples = [e for e in small_examples if e.prev_ids != e.next_ids and PAD_ID not in e.prev_ids + e.next_ids]
    swapped = [dataclasses.replace(e, prev_ids=e.next_ids, next_ids=e.prev_ids) for e in examples[:8]]
    original = model.predict_proba(examples[:8])
    assert np.abs(model.predict_proba(swapped) - original).max() > 1e-6
    # the focus model never sees the neighbors
    focus = create_model("focus", trainable_table, seed=4)
    assert np.array_equal(focus.predict_proba(swapped), focus.predict_proba(examples[:8]))


def test_state_dict_round_trip(small_examples, trainable_table):
    source = create_model("merged", trainable_table, seed=1)
    target = create_model("merged", trainable_table, seed=2)
    assert source.parameter_hash() != target.parameter_hash()
    target.load_state_dict(source.state_dict())
    assert source.parameter_hash() == target.parameter_hash()
    assert np.array_equal(source.predict_proba(small_examples[:6]), target.predict_proba(small_examples[:6]))


def test_unknown_model_name(trainable_table):
    with pytest.raises(ValueError):
        create_model("crf", trainable_table)
