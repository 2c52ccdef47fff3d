"""
End-to-end section labeling pipeline

SectionLabeler trains the three base models, the merged baseline, the
stacker and the TF-IDF SVM from one labeled corpus, predicts with any of
the evaluated systems, fine-tunes the stacker on a new domain and saves or
loads everything as a single model bundle.
"""

import logging
import os
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from .baselines import RULE_BASELINES, RuleBaseline, TfidfSvmBaseline
from .bundle import ModelBundle, load_bundle, save_bundle
from .config import PipelineConfig
from .core_types import AnnotatedReport, LabeledSentence, LabelSource, Report, SectionLabel, split_sizes
from .embeddings import EmbeddingTable, load_embeddings, random_embeddings
from .errors import ConfigError, DegenerateDataError, EmptyCorpusError, ModelFileError
from .evaluation import CrossValidationResult, MetricsReport, score
from .models import BASE_MODELS, NEURAL_MODELS, SectionModel, SentenceExample, build_examples, create_models
from .nn.trainer import TrainingHistory, train
from .stacking import StackerModel, fit_stacker, finetune_stacker, stack_probabilities
from .utils.batch_processor import run_in_workers
from .utils.text_processing import Vocabulary, build_vocab
from .weak_labeler import load_rules

logger = logging.getLogger(__name__)

SYSTEMS = ("stacking", "merged", "focus", "surrounding", "layout", "svm", "rules-mgb", "rules-mimic")
# fixed once the models are trained
MODEL_SHAPING_KEYS = ("embedding_dim", "rules", "raw_layout_counts")


def log_memory(stage: str) -> None:
    """Log resident memory if psutil is available"""
    try:
        import psutil
    except ImportError:
        return
    process = psutil.Process(os.getpid())
    logger.info("Memory %s: %.2f MB", stage, process.memory_info().rss / 1024 / 1024)


def split_annotated(corpus: Sequence[AnnotatedReport], ratios: Sequence[float],
                    seed: int) -> Tuple[List[AnnotatedReport], List[AnnotatedReport], List[AnnotatedReport]]:
    """Report-level split of an annotated corpus, shuffled exactly like split_dataset"""
    if not corpus:
        raise EmptyCorpusError("empty corpus")
    n_train, n_holdout, _ = split_sizes(len(corpus), ratios)
    shuffled = [corpus[i] for i in np.random.default_rng(seed).permutation(len(corpus))]
    return shuffled[:n_train], shuffled[n_train:n_train + n_holdout], shuffled[n_train + n_holdout:]


def _texts_and_labels(corpus: Sequence[AnnotatedReport]) -> Tuple[List[str], List[int]]:
    texts = [s.text for item in corpus for s in item.report.sentences]
    labels = [code for item in corpus for code in item.label_codes]
    return texts, labels


class SectionLabeler:
    """The full labeling pipeline and every comparison system"""

    def __init__(self, config: Optional[PipelineConfig] = None):
        self.config = config or PipelineConfig()
        self.rules = load_rules(self.config.rules, self.config.label_merge_map)
        self.vocab: Optional[Vocabulary] = None
        self.table: Optional[EmbeddingTable] = None
        self.models: Dict[str, SectionModel] = {}
        self.stacker: Optional[StackerModel] = None
        self.svm: Optional[TfidfSvmBaseline] = None
        self.histories: Dict[str, TrainingHistory] = {}
        self.test_corpus: List[AnnotatedReport] = []

    # -- training -----------------------------------------------------------

    def fit(self, corpus: Sequence[AnnotatedReport]) -> "SectionLabeler":
        """Split the corpus into train / stacking holdout / test and train everything

        The test part is kept on ``test_corpus`` for evaluation.
        """
        train_part, holdout_part, test_part = split_annotated(corpus, self.config.split_ratios, self.config.seed)
        logger.info("Split %d reports into %d train, %d stacking holdout, %d test",
                    len(corpus), len(train_part), len(holdout_part), len(test_part))
        self.test_corpus = test_part
        return self.fit_reports(train_part, holdout_part)

    def fit_reports(self, train_corpus: Sequence[AnnotatedReport],
                    holdout_corpus: Optional[Sequence[AnnotatedReport]] = None) -> "SectionLabeler":
        """Train on explicit training and stacking-holdout reports

        Without a holdout, the training reports are divided in the configured
        train : holdout proportion.

        Args:
            train_corpus (list): Labeled reports for the base models and baselines
            holdout_corpus (list, optional): Labeled reports for the stacker

        Returns:
            SectionLabeler: self
        """
        if holdout_corpus is None:
            r_train, r_holdout, _ = self.config.split_ratios
            total = r_train + r_holdout
            ratios = (r_train / total, r_holdout / total, 0.0) if total > 0 else (1.0, 0.0, 0.0)
            train_corpus, holdout_corpus, _ = split_annotated(train_corpus, ratios, self.config.seed)
        if not train_corpus:
            raise EmptyCorpusError("empty training set")
        if not holdout_corpus:
            raise EmptyCorpusError("empty stacking holdout")

        started = time.time()
        log_memory("before training")
        fit_part, val_part, _ = split_annotated(
            train_corpus, (1.0 - self.config.validation_fraction, self.config.validation_fraction, 0.0),
            self.config.seed + 1)

        self.vocab = build_vocab([item.report for item in train_corpus], self.config.min_count)
        self.table = self._make_embeddings(self.vocab)
        fit_examples = self.examples(fit_part)
        val_examples = self.examples(val_part)
        logger.info("Training on %d sentences (%d validation), vocabulary %d, embedding dim %d",
                    len(fit_examples), len(val_examples), len(self.vocab), self.table.dim)

        models = create_models(self.config, self.table)

        def train_job(name: str):
            def job():
                trained, history = train(models[name], fit_examples, val_examples,
                                         getattr(self.config, name), name=name)
                return trained, history
            return job

        results = run_in_workers({name: train_job(name) for name in NEURAL_MODELS}, self.config.workers)
        self.models = {name: result[0] for name, result in results.items()}
        self.histories = {name: result[1] for name, result in results.items()}
        log_memory("after base models")

        holdout_examples = self.examples(holdout_corpus)
        self.stacker = fit_stacker(self.stacking_inputs(holdout_examples),
                                   [e.label for e in holdout_examples], self.config.stacker)

        texts, labels = _texts_and_labels(fit_part)
        val_texts, val_labels = _texts_and_labels(val_part)
        try:
            self.svm = TfidfSvmBaseline(self.config.svm).fit(texts, labels, val_texts, val_labels)
        except DegenerateDataError as e:
            logger.warning("SVM baseline skipped: %s", e)
            self.svm = None
        log_memory("after training")
        logger.info("Pipeline trained in %.1fs", time.time() - started)
        return self

    def _make_embeddings(self, vocab: Vocabulary) -> EmbeddingTable:
        path = self.config.embeddings_path
        if path:
            trainable = bool(self.config.trainable_embeddings)
            return load_embeddings(path, vocab, seed=self.config.seed, trainable=trainable)
        trainable = True if self.config.trainable_embeddings is None else self.config.trainable_embeddings
        return random_embeddings(vocab, self.config.embedding_dim, seed=self.config.seed, trainable=trainable)

    # -- inference ----------------------------------------------------------

    def _require_trained(self) -> None:
        if self.vocab is None or not self.models or self.stacker is None:
            raise ModelFileError("The pipeline has not been trained or loaded")

    def report_examples(self, report: Report,
                        labels: Optional[Sequence[SectionLabel]] = None) -> List[SentenceExample]:
        self._require_vocab()
        return build_examples(report, self.vocab, self.rules, labels, self.config.raw_layout_counts)

    def examples(self, corpus: Sequence[AnnotatedReport]) -> List[SentenceExample]:
        return [example for item in corpus
                for example in self.report_examples(item.report, [labeled.label for labeled in item.labels])]

    def _require_vocab(self) -> None:
        if self.vocab is None:
            raise ModelFileError("The pipeline has not been trained or loaded")

    def stacking_inputs(self, examples: Sequence[SentenceExample]) -> np.ndarray:
        """[N, 21] concatenated base-model probabilities"""
        probs = [self.models[name].predict_proba(list(examples)) for name in BASE_MODELS]
        return stack_probabilities(*probs)

    def predict_proba(self, report: Report) -> np.ndarray:
        """Per-sentence stacking inputs (focus, surrounding, layout probabilities)"""
        self._require_trained()
        return self.stacking_inputs(self.report_examples(report))

    def predict_examples(self, examples: Sequence[SentenceExample], texts: Sequence[str],
                         system: str = "stacking") -> np.ndarray:
        if system == "stacking":
            return self.stacker.predict(self.stacking_inputs(examples)) if examples else np.zeros(0, dtype=np.int64)
        if system in NEURAL_MODELS:
            return self.models[system].predict(list(examples))
        if system == "svm":
            if self.svm is None:
                raise ModelFileError("No SVM baseline was trained")
            return self.svm.predict(list(texts))
        raise ConfigError(f"Unknown system {system!r}; choose from {', '.join(SYSTEMS)}")

    def predict(self, report: Report, system: str = "stacking") -> List[SectionLabel]:
        """Label every sentence of a report with the chosen system"""
        if system in RULE_BASELINES:
            return RuleBaseline.named(system, self.config.label_merge_map).predict(report)
        self._require_trained()
        codes = self.predict_examples(self.report_examples(report), [s.text for s in report.sentences], system)
        return [SectionLabel(int(code)) for code in codes]

    def predict_corpus(self, corpus: Sequence[AnnotatedReport], system: str = "stacking") -> np.ndarray:
        if system in RULE_BASELINES:
            baseline = RuleBaseline.named(system, self.config.label_merge_map)
            return np.array([int(label) for item in corpus for label in baseline.predict(item.report)], dtype=np.int64)
        self._require_trained()
        examples = self.examples(corpus)
        texts, _ = _texts_and_labels(corpus)
        return np.asarray(self.predict_examples(examples, texts, system), dtype=np.int64)

    def label_report(self, report: Report, system: str = "stacking") -> List[LabeledSentence]:
        """Predicted labels as LabeledSentences (source=predicted)"""
        return [LabeledSentence(sentence=sentence, label=label, source=LabelSource.PREDICTED)
                for sentence, label in zip(report.sentences, self.predict(report, system))]

    def evaluate(self, corpus: Sequence[AnnotatedReport], system: str = "stacking") -> MetricsReport:
        if not corpus:
            raise EmptyCorpusError("empty evaluation corpus")
        gold = [code for item in corpus for code in item.label_codes]
        return score(self.predict_corpus(corpus, system), gold, system=system)

    # -- fine-tuning ----------------------------------------------------------

    def base_model_hashes(self) -> Dict[str, str]:
        return {name: model.parameter_hash() for name, model in self.models.items()}

    def finetune(self, corpus: Sequence[AnnotatedReport], dataset_id: Optional[str] = None) -> "SectionLabeler":
        """Re-fit only the stacker on target-domain reports; base models stay frozen"""
        self._require_trained()
        if not corpus:
            raise EmptyCorpusError("empty fine-tuning set")
        before = self.base_model_hashes()
        examples = self.examples(corpus)
        self.stacker = finetune_stacker(self.stacker, self.stacking_inputs(examples),
                                        [e.label for e in examples], self.config.stacker, dataset_id)
        if self.base_model_hashes() != before:
            raise RuntimeError("Base model parameters changed during stacker fine-tuning")
        return self

    def reconfigure(self, config: PipelineConfig) -> "SectionLabeler":
        """Swap in runtime settings (seed, workers, stacker, merge map) for a trained pipeline

        Raises:
            ConfigError: If a setting the trained models depend on would change
        """
        changed = [key for key in MODEL_SHAPING_KEYS if getattr(config, key) != getattr(self.config, key)]
        if changed:
            raise ConfigError(f"Cannot change {', '.join(changed)} of a trained model")
        self.config = config
        self.rules = load_rules(config.rules, config.label_merge_map)
        return self

    # -- persistence --------------------------------------------------------

    def to_bundle(self) -> ModelBundle:
        self._require_trained()
        return ModelBundle(
            config=self.config,
            vocab=self.vocab,
            embeddings=self.table.vectors,
            embeddings_trainable=self.table.trainable,
            states={name: model.state_dict() for name, model in self.models.items()},
            stacker=self.stacker,
            baselines=self.svm,
            metadata={name: {"best_epoch": h.best_epoch,
                             "epochs": len(h.epochs),
                             "best_validation_accuracy": round(h.best_validation_accuracy, 6)}
                      for name, h in sorted(self.histories.items())},
        )

    def save(self, path: Union[str, Path]) -> Path:
        return save_bundle(self.to_bundle(), path)

    @classmethod
    def from_bundle(cls, bundle: ModelBundle) -> "SectionLabeler":
        labeler = cls(bundle.config)
        labeler.vocab = bundle.vocab
        labeler.table = EmbeddingTable(bundle.embeddings, trainable=bundle.embeddings_trainable)
        labeler.models = create_models(bundle.config, labeler.table)
        for name, model in labeler.models.items():
            if name not in bundle.states:
                raise ModelFileError(f"Bundle has no parameters for the {name} model")
            try:
                model.load_state_dict(bundle.states[name])
            except (KeyError, ValueError) as e:
                raise ModelFileError(f"Bundle parameters do not fit the {name} model: {e}") from e
        labeler.stacker = bundle.stacker
        labeler.svm = bundle.baselines
        return labeler

    @classmethod
    def load(cls, path: Union[str, Path]) -> "SectionLabeler":
        return cls.from_bundle(load_bundle(path))


def cross_validate_finetune(labeler: SectionLabeler, target_corpus: Sequence[AnnotatedReport], k: int = 5,
                            finetune_fraction: float = 0.2, seed: int = 0) -> CrossValidationResult:
    """Repeat: fine-tune a copy of the stacker on a shuffled share of the target reports, score on the rest

    Args:
        labeler (SectionLabeler): Trained pipeline (left unchanged)
        target_corpus (list): Labeled target-domain reports
        k (int): Number of seeded repeats
        finetune_fraction (float): Share of reports used for fine-tuning
        seed (int): Base seed of the shuffles

    Returns:
        CrossValidationResult: Accuracy and macro-F1 of each repeat
    """
    labeler._require_trained()
    n = len(target_corpus)
    n_tune = int(np.floor(n * finetune_fraction))
    if n_tune < 1 or n_tune >= n:
        raise EmptyCorpusError(f"Cannot take a {finetune_fraction:.0%} fine-tuning share of {n} reports "
                               "and keep a non-empty test part")

    per_report = []
    for item in target_corpus:
        examples = labeler.report_examples(item.report, [labeled.label for labeled in item.labels])
        per_report.append((labeler.stacking_inputs(examples), np.array(item.label_codes, dtype=np.int64)))

    accuracies, macro_f1s = [], []
    for repeat in range(k):
        order = np.random.default_rng([seed, repeat]).permutation(n)
        tune, test = order[:n_tune], order[n_tune:]
        tuned = finetune_stacker(labeler.stacker,
                                 np.concatenate([per_report[i][0] for i in tune]),
                                 np.concatenate([per_report[i][1] for i in tune]),
                                 labeler.config.stacker, dataset_id=f"repeat-{repeat + 1}")
        test_x = np.concatenate([per_report[i][0] for i in test])
        test_y = np.concatenate([per_report[i][1] for i in test])
        report = score(tuned.predict(test_x), test_y, system="stacking-finetuned")
        logger.info("Fine-tune repeat %d/%d: accuracy %.4f", repeat + 1, k, report.accuracy)
        accuracies.append(report.accuracy)
        macro_f1s.append(report.macro_f1)
    return CrossValidationResult(system="stacking-finetuned", folds=k, accuracies=accuracies, macro_f1s=macro_f1s)
