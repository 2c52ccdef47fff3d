"""
Shared fixtures for the section labeler tests
"""

import pytest

from section_labeler.config import PipelineConfig, StackerConfig, SvmConfig, TrainConfig
from section_labeler.corpus_io import generate_synthetic_corpus
from section_labeler.embeddings import random_embeddings
from section_labeler.models import build_examples
from section_labeler.pipeline import SectionLabeler
from section_labeler.utils.text_processing import build_vocab, make_report
from section_labeler.weak_labeler import load_rules

SAMPLE_REPORT = (
    "Final report.\n"
    "\n"
    "REASON FOR EXAM:\n"
    "Evaluate for pneumonia.\n"
    "\n"
    "HISTORY: Sixty year old male with cough and fever.\n"
    "\n"
    "TECHNIQUE:\n"
    "Frontal and lateral views of the chest were obtained.\n"
    "\n"
    "FINDINGS:\n"
    "The lungs are clear. There is no pleural effusion or pneumothorax.\n"
    "\n"
    "IMPRESSION\n"
    "No acute cardiopulmonary process.\n"
)


@pytest.fixture
def sample_report():
    return make_report("sample", SAMPLE_REPORT)


@pytest.fixture(scope="session")
def mgb_rules():
    return load_rules("mgb")


@pytest.fixture(scope="session")
def small_corpus():
    return generate_synthetic_corpus(n_reports=12, seed=3)


@pytest.fixture(scope="session")
def small_vocab(small_corpus):
    return build_vocab([item.report for item in small_corpus])


@pytest.fixture(scope="session")
def small_examples(small_corpus, small_vocab, mgb_rules):
    return [example for item in small_corpus
            for example in build_examples(item.report, small_vocab, mgb_rules,
                                          [labeled.label for labeled in item.labels])]


@pytest.fixture
def trainable_table(small_vocab):
    return random_embeddings(small_vocab, dim=8, seed=0, trainable=True)


def fast_pipeline_config(seed=5):
    """A pipeline configuration small enough to train in seconds"""
    context = TrainConfig(max_epochs=3, patience=2, batch_size=16)
    return PipelineConfig(
        seed=seed,
        embedding_dim=8,
        workers=1,
        focus=context,
        surrounding=context,
        merged=context,
        layout=TrainConfig(max_epochs=20, patience=5, batch_size=16),
        stacker=StackerConfig(max_iterations=500),
        svm=SvmConfig(epochs=20),
    ).with_seed(seed)


@pytest.fixture
def fast_config():
    return fast_pipeline_config()


@pytest.fixture(scope="session")
def training_corpus():
    return generate_synthetic_corpus(n_reports=40, seed=1)


@pytest.fixture(scope="session")
def trained_labeler(training_corpus):
    return SectionLabeler(fast_pipeline_config()).fit(training_corpus)
