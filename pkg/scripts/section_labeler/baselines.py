"""
Non-neural comparison systems

A unigram TF-IDF + linear SVM trained with balanced class weights, and the
two rule-based baselines that simply apply a weak-labeling rule set.
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from sklearn.feature_extraction.text import TfidfVectorizer
from sklearn.linear_model import SGDClassifier

from .config import SvmConfig
from .core_types import NUM_LABELS, Report, SectionLabel
from .errors import DegenerateDataError, EmptyCorpusError
from .utils.text_processing import word_tokens
from .weak_labeler import RuleSet, load_rules, weak_label

logger = logging.getLogger(__name__)

RULE_BASELINES = {"rules-mgb": "mgb", "rules-mimic": "mimic"}


def fit_tfidf(sentences: Sequence[str]) -> TfidfVectorizer:
    """Fit unigram TF-IDF on training sentences

    Tokens are the cleaned, lowercased words used everywhere else; idf is
    ln((1 + N) / (1 + df)) + 1 and rows are L2-normalized.

    Raises:
        EmptyCorpusError: If there are no sentences
        DegenerateDataError: If the sentences contain no tokens at all
    """
    if len(sentences) == 0:
        raise EmptyCorpusError("Cannot fit TF-IDF on an empty corpus")
    vectorizer = TfidfVectorizer(analyzer=word_tokens, norm="l2", use_idf=True, smooth_idf=True)
    try:
        vectorizer.fit(list(sentences))
    except ValueError as e:
        raise DegenerateDataError(f"Cannot fit TF-IDF: {e}") from e
    return vectorizer


def balanced_class_weights(labels: Sequence[int]) -> Dict[int, float]:
    """n_samples / (7 * count_k) for every class present"""
    labels = np.asarray(labels, dtype=np.int64)
    counts = np.bincount(labels, minlength=NUM_LABELS)
    return {k: len(labels) / (NUM_LABELS * counts[k]) for k in range(NUM_LABELS) if counts[k] > 0}


def fit_svm(vectors, labels: Sequence[int], config: Optional[SvmConfig] = None,
            alpha: Optional[float] = None) -> SGDClassifier:
    """Linear one-vs-rest SVM by constant-rate subgradient descent on the weighted hinge loss

    Args:
        vectors (sparse matrix): TF-IDF rows
        labels (list): Label codes
        config (SvmConfig, optional): Learning rate, epochs and seed
        alpha (float, optional): L2 strength; defaults to the first configured alpha

    Returns:
        SGDClassifier: The fitted classifier

    Raises:
        DegenerateDataError: If fewer than two classes are present
    """
    config = config or SvmConfig()
    labels = np.asarray(labels, dtype=np.int64)
    if len(np.unique(labels)) < 2:
        raise DegenerateDataError("SVM needs at least two classes")
    svm = SGDClassifier(
        loss="hinge",
        penalty="l2",
        alpha=config.alphas[0] if alpha is None else alpha,
        learning_rate="constant",
        eta0=config.learning_rate,
        max_iter=config.epochs,
        tol=None,
        shuffle=True,
        random_state=config.seed,
        class_weight=balanced_class_weights(labels),
    )
    return svm.fit(vectors, labels)


def svm_margins(svm: SGDClassifier, vectors) -> np.ndarray:
    """Per-class margins [N, 7]; classes unseen in training get -inf"""
    raw = svm.decision_function(vectors)
    margins = np.full((vectors.shape[0], NUM_LABELS), -np.inf)
    classes = svm.classes_.astype(np.int64)
    if len(classes) == 2:
        margins[:, classes[0]] = -raw
        margins[:, classes[1]] = raw
    else:
        margins[:, classes] = raw
    return margins


class TfidfSvmBaseline:
    """TF-IDF vectorizer plus the SVM whose L2 strength won on validation"""

    def __init__(self, config: Optional[SvmConfig] = None):
        self.config = config or SvmConfig()
        self.vectorizer: Optional[TfidfVectorizer] = None
        self.svm: Optional[SGDClassifier] = None
        self.alpha: Optional[float] = None

    def fit(self, texts: Sequence[str], labels: Sequence[int],
            val_texts: Sequence[str] = (), val_labels: Sequence[int] = ()) -> "TfidfSvmBaseline":
        self.vectorizer = fit_tfidf(texts)
        train_x = self.vectorizer.transform(list(texts))
        if len(val_texts) == 0:
            self.alpha = self.config.alphas[0]
            self.svm = fit_svm(train_x, labels, self.config, self.alpha)
            return self

        val_x = self.vectorizer.transform(list(val_texts))
        val_y = np.asarray(val_labels, dtype=np.int64)
        best_accuracy = -1.0
        for alpha in self.config.alphas:
            svm = fit_svm(train_x, labels, self.config, alpha)
            accuracy = float(np.mean(np.argmax(svm_margins(svm, val_x), axis=1) == val_y))
            logger.debug("SVM alpha %g: validation accuracy %.4f", alpha, accuracy)
            if accuracy > best_accuracy:
                best_accuracy, self.alpha, self.svm = accuracy, alpha, svm
        logger.info("SVM baseline: alpha %g selected (validation accuracy %.4f)", self.alpha, best_accuracy)
        return self

    def margins(self, texts: Sequence[str]) -> np.ndarray:
        if self.svm is None:
            raise RuntimeError("TfidfSvmBaseline is not fitted")
        return svm_margins(self.svm, self.vectorizer.transform(list(texts)))

    def predict(self, texts: Sequence[str]) -> np.ndarray:
        if len(texts) == 0:
            return np.zeros(0, dtype=np.int64)
        # np.argmax keeps the lowest code on ties
        return np.argmax(self.margins(texts), axis=1)


class RuleBaseline:
    """Labels sentences with a weak-labeling rule set and nothing else"""

    def __init__(self, rules: RuleSet):
        self.rules = rules

    @classmethod
    def named(cls, system: str, extra_merge_map=None) -> "RuleBaseline":
        return cls(load_rules(RULE_BASELINES[system], extra_merge_map))

    def predict(self, report: Report) -> List[SectionLabel]:
        return [item.label for item in weak_label(report, self.rules)]
