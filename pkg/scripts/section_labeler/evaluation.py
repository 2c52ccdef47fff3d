"""
Metrics, confusion matrices and k-fold cross-validation
"""

import logging
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field
from sklearn.metrics import confusion_matrix, precision_recall_fscore_support
from sklearn.model_selection import KFold

from .config import PipelineConfig
from .core_types import NUM_LABELS, AnnotatedReport, SectionLabel
from .errors import ConfigError, DegenerateDataError, DimensionMismatchError, EmptyCorpusError
from .utils.batch_processor import run_in_workers

logger = logging.getLogger(__name__)

LABEL_CODES = list(range(NUM_LABELS))


class ConfusionMatrix(BaseModel):
    """7x7 counts, rows are the true label and columns the prediction"""

    counts: List[List[int]]

    @property
    def array(self) -> np.ndarray:
        return np.asarray(self.counts, dtype=np.int64)

    @property
    def total(self) -> int:
        return int(self.array.sum())

    def percentages(self) -> np.ndarray:
        """Row-normalized percentages; rows with no gold items stay zero"""
        counts = self.array.astype(np.float64)
        totals = counts.sum(axis=1, keepdims=True)
        return np.divide(100.0 * counts, totals, out=np.zeros_like(counts), where=totals > 0)

    def render(self, percent: bool = True) -> str:
        names = [label.render()[:5] for label in SectionLabel]
        values = self.percentages() if percent else self.array
        lines = [f"{'true/pred':<12}" + "".join(f"{name:>8}" for name in names)]
        for label, row in zip(SectionLabel, values):
            cells = "".join(f"{v:>8.1f}" if percent else f"{v:>8d}" for v in row)
            lines.append(f"{label.render():<12}{cells}")
        return "\n".join(lines)


class ClassMetrics(BaseModel):
    label: str
    precision: float
    recall: float
    f1: float
    support: int


class MetricsReport(BaseModel):
    """Sentence-level accuracy, macro-F1 over all seven classes and the confusion matrix"""

    system: str = ""
    n_sentences: int
    accuracy: float
    macro_f1: float
    per_class: List[ClassMetrics]
    confusion: ConfusionMatrix
    percentages: List[List[float]] = Field(description="Row-normalized confusion matrix in percent.")

    def table(self) -> str:
        lines = [f"{'Class':<12}{'Precision':>10}{'Recall':>10}{'F1':>10}{'Support':>10}"]
        for item in self.per_class:
            lines.append(f"{item.label:<12}{item.precision:>10.3f}{item.recall:>10.3f}"
                         f"{item.f1:>10.3f}{item.support:>10d}")
        lines.append("")
        lines.append(f"Accuracy: {100 * self.accuracy:.1f}%   Macro-F1: {100 * self.macro_f1:.1f}")
        return "\n".join(lines)


def score(predictions: Sequence[int], gold: Sequence[int], system: str = "") -> MetricsReport:
    """Score predicted label codes against gold codes

    Classes absent from both gold and predictions contribute an F1 of 0
    to the macro mean.

    Args:
        predictions (list): Predicted label codes
        gold (list): Gold label codes
        system (str): Name recorded in the report

    Returns:
        MetricsReport: Accuracy, macro-F1, per-class metrics and confusion matrix

    Raises:
        DimensionMismatchError: If the lengths differ
        EmptyCorpusError: If there is nothing to score
    """
    if len(predictions) != len(gold):
        raise DimensionMismatchError(f"{len(predictions)} predictions for {len(gold)} gold labels")
    if len(gold) == 0:
        raise EmptyCorpusError("Nothing to score")
    y_pred = np.asarray([int(p) for p in predictions], dtype=np.int64)
    y_true = np.asarray([int(g) for g in gold], dtype=np.int64)

    counts = confusion_matrix(y_true, y_pred, labels=LABEL_CODES)
    precision, recall, f1, support = precision_recall_fscore_support(
        y_true, y_pred, labels=LABEL_CODES, average=None, zero_division=0)
    matrix = ConfusionMatrix(counts=counts.tolist())
    return MetricsReport(
        system=system,
        n_sentences=len(y_true),
        accuracy=float(np.trace(counts) / counts.sum()),
        macro_f1=float(np.mean(f1)),
        per_class=[
            ClassMetrics(label=label.render(), precision=float(precision[label]), recall=float(recall[label]),
                         f1=float(f1[label]), support=int(support[label]))
            for label in SectionLabel
        ],
        confusion=matrix,
        percentages=matrix.percentages().tolist(),
    )


class CrossValidationResult(BaseModel):
    system: str
    folds: int
    accuracies: List[float]
    macro_f1s: List[float]

    @property
    def accuracy_mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def accuracy_std(self) -> float:
        # population std across folds
        return float(np.std(self.accuracies))

    @property
    def macro_f1_mean(self) -> float:
        return float(np.mean(self.macro_f1s))

    @property
    def macro_f1_std(self) -> float:
        return float(np.std(self.macro_f1s))

    def summary(self) -> str:
        return (f"{self.system} ({self.folds}-fold): accuracy {format_mean_std(self.accuracies)}, "
                f"macro-F1 {format_mean_std(self.macro_f1s)}")


def format_mean_std(values: Sequence[float]) -> str:
    """Fractions rendered as "97.0% ± 0.2%" (population std)"""
    return f"{100 * float(np.mean(values)):.1f}% ± {100 * float(np.std(values)):.1f}%"


def kfold_indices(n_reports: int, k: int, seed: int) -> List[np.ndarray]:
    """Held-out report indices for each of k shuffled folds"""
    if k < 2:
        raise ConfigError(f"Cross-validation needs at least 2 folds, got {k}")
    if k > n_reports:
        raise DegenerateDataError(f"Cannot make {k} folds from {n_reports} reports")
    splitter = KFold(n_splits=k, shuffle=True, random_state=seed)
    return [test for _, test in splitter.split(np.arange(n_reports))]


def cross_validate(config: PipelineConfig, corpus: Sequence[AnnotatedReport], k: int = 10,
                   seed: Optional[int] = None, system: str = "stacking",
                   max_workers: int = 1) -> CrossValidationResult:
    """Train and score the full pipeline on k report-level folds

    Within each fold the remaining reports are split into training and
    stacking-holdout parts in the configured proportions.

    Args:
        config (PipelineConfig): Pipeline settings
        corpus (list): Labeled reports
        k (int): Number of folds
        seed (int, optional): Fold and training seed; defaults to config.seed
        system (str): System scored on each held-out fold
        max_workers (int): Folds trained concurrently

    Returns:
        CrossValidationResult: Per-fold accuracies and macro-F1 values
    """
    from .pipeline import SectionLabeler

    seed = config.seed if seed is None else seed
    if not corpus:
        raise EmptyCorpusError("empty corpus")
    folds = kfold_indices(len(corpus), k, seed)

    def run_fold(fold: int, held_out: np.ndarray):
        def job():
            held = set(held_out.tolist())
            train = [report for i, report in enumerate(corpus) if i not in held]
            test = [corpus[i] for i in sorted(held)]
            labeler = SectionLabeler(config.with_seed(seed)).fit_reports(train)
            report = labeler.evaluate(test, system)
            logger.info("Fold %d/%d: accuracy %.4f, macro-F1 %.4f", fold + 1, k, report.accuracy, report.macro_f1)
            return report
        return job

    tasks: Dict[str, object] = {f"fold-{i + 1}": run_fold(i, held) for i, held in enumerate(folds)}
    reports = run_in_workers(tasks, max_workers)
    return CrossValidationResult(
        system=system,
        folds=k,
        accuracies=[r.accuracy for r in reports.values()],
        macro_f1s=[r.macro_f1 for r in reports.values()],
    )
