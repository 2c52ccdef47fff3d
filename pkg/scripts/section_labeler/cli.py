"""
Command-line interface for the section labeler

    section-labeler weak-label --in reports/ --out weak.jsonl --rules mgb
    section-labeler gen-synthetic --out synth.jsonl --n 500 --seed 0
    section-labeler train --in synth.jsonl --out model.zip --seed 13
    section-labeler evaluate --model model.zip --in test.jsonl --system stacking
    section-labeler label --model model.zip --in report.txt
    section-labeler cross-validate --in synth.jsonl --folds 5
    section-labeler finetune --model model.zip --in shifted.jsonl --out tuned.zip
    section-labeler grad-check
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import List, Optional

import dotenv

from .core_types import AnnotatedReport
from .corpus_io import (generate_synthetic_corpus, load_corpus, load_plain_reports, normalize_newlines,
                        parse_synthetic_templates, weak_labeled, write_labeled_jsonl)
from .embeddings import random_embeddings
from .errors import ConfigError, EmptyCorpusError, SectionLabelerError
from .evaluation import cross_validate
from .models import NEURAL_MODELS, build_examples, create_model
from .nn.gradcheck import grad_check
from .pipeline import SYSTEMS, SectionLabeler, cross_validate_finetune, split_annotated
from .stacking import ensemble_weight_report, format_weight_report
from .utils.template_loader import ENV_PREFIX, REPO_ROOT, load_config, load_synthetic_templates
from .utils.text_processing import build_vocab, make_report
from .weak_labeler import load_rules

logger = logging.getLogger("section_labeler")

BANNER = "=" * 50
GRAD_CHECK_LIMITS = {"layout": 1e-4, "focus": 1e-3, "surrounding": 1e-3, "merged": 1e-3}


def banner(title: str) -> None:
    print("\n" + BANNER)
    print(title)
    print(BANNER)


def setup_logging(level: Optional[str]) -> None:
    dotenv.load_dotenv(REPO_ROOT / ".env.local")
    name = (level or os.getenv(ENV_PREFIX + "LOG_LEVEL") or "INFO").upper()
    if not isinstance(logging.getLevelName(name), int):
        raise ConfigError(f"Unknown log level: {name}")
    logging.basicConfig(level=name, format="%(asctime)s %(levelname)s %(name)s: %(message)s")


def config_from_args(args):
    overrides = {"seed": args.seed, "rules": getattr(args, "rules", None)}
    return load_config(args.config, overrides)


def labeler_from_args(args) -> SectionLabeler:
    """Load the model bundle and layer --config, the environment and --seed over its stored config"""
    labeler = SectionLabeler.load(args.model)
    config = load_config(args.config, {"seed": args.seed}, base=labeler.config.model_dump())
    return labeler.reconfigure(config)


def read_corpus(path: str, config) -> List[AnnotatedReport]:
    rules = load_rules(config.rules, config.label_merge_map)
    return load_corpus(path, rules, config.label_merge_map, max_workers=config.workers)


def read_reports(path: str):
    """A single report file or a directory of ``*.txt`` reports"""
    target = Path(path)
    if target.is_dir():
        return load_plain_reports(target)
    if not target.is_file():
        raise EmptyCorpusError(f"No report at {target}")
    with open(target, "r", encoding="utf-8", newline="") as f:
        return [make_report(target.stem, normalize_newlines(f.read()))]


# ---------------------------------------------------------------------------
# Commands


def cmd_weak_label(args) -> int:
    config = config_from_args(args)
    rules = load_rules(config.rules, config.label_merge_map)
    corpus = weak_labeled(load_plain_reports(args.input), rules)
    write_labeled_jsonl(args.out, corpus)
    n_sentences = sum(len(item.labels) for item in corpus)
    print(f"Weak-labeled {len(corpus)} reports ({n_sentences} sentences) with rule set '{rules.name}' -> {args.out}")
    return 0


def cmd_gen_synthetic(args) -> int:
    templates = parse_synthetic_templates(load_synthetic_templates(args.templates))
    corpus = generate_synthetic_corpus(templates, n_reports=args.n, seed=args.seed or 0, family=args.family,
                                       header_dropout=args.header_dropout)
    write_labeled_jsonl(args.out, corpus)
    print(f"Generated {len(corpus)} '{args.family}' reports -> {args.out}")
    return 0


def cmd_train(args) -> int:
    config = config_from_args(args)
    corpus = read_corpus(args.input, config)
    print(f"Training on {len(corpus)} reports (seed {config.seed})")
    labeler = SectionLabeler(config).fit(corpus)
    path = labeler.save(args.out)

    banner("TRAINING SUMMARY")
    for name, history in sorted(labeler.histories.items()):
        print(f"{name:<12} best epoch {history.best_epoch:>4}   "
              f"validation accuracy {100 * history.best_validation_accuracy:.1f}%")
    if labeler.test_corpus:
        report = labeler.evaluate(labeler.test_corpus, "stacking")
        print(f"Held-out test ({len(labeler.test_corpus)} reports): accuracy {100 * report.accuracy:.1f}%, "
              f"macro-F1 {100 * report.macro_f1:.1f}")
    print(f"Model bundle: {path}")
    print(BANNER)
    return 0


def cmd_evaluate(args) -> int:
    labeler = labeler_from_args(args)
    corpus = read_corpus(args.input, labeler.config)
    report = labeler.evaluate(corpus, args.system)

    banner(f"EVALUATION: {args.system}")
    print(report.table())
    print("\nConfusion matrix (row %):")
    print(report.confusion.render(percent=True))
    if args.system == "stacking":
        print("\nEnsemble weights (mean |w| per class and base model):")
        print(format_weight_report(ensemble_weight_report(labeler.stacker)))
    print(BANNER)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(report.model_dump_json(indent=2))
        print(f"Metrics written to {args.out}")
    return 0


def cmd_label(args) -> int:
    labeler = labeler_from_args(args)
    reports = read_reports(args.input)
    labeled = []
    for report in reports:
        sentences = labeler.label_report(report, args.system)
        labeled.append(AnnotatedReport(report=report, labels=sentences))
        if len(reports) > 1:
            print(f"# {report.id}")
        for item in sentences:
            print(f"[{item.label.render()}] {item.sentence.text}")
    if args.out:
        write_labeled_jsonl(args.out, labeled)
    return 0


def cmd_cross_validate(args) -> int:
    config = config_from_args(args)
    corpus = read_corpus(args.input, config)
    result = cross_validate(config, corpus, k=args.folds, seed=config.seed, system=args.system)
    banner("CROSS-VALIDATION")
    for fold, (acc, f1) in enumerate(zip(result.accuracies, result.macro_f1s), start=1):
        print(f"Fold {fold:>2}: accuracy {100 * acc:.1f}%   macro-F1 {100 * f1:.1f}")
    print(result.summary())
    print(BANNER)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            f.write(result.model_dump_json(indent=2))
    return 0


def cmd_finetune(args) -> int:
    labeler = labeler_from_args(args)
    corpus = read_corpus(args.input, labeler.config)
    seed = labeler.config.seed

    if args.folds:
        before = labeler.evaluate(corpus, "stacking")
        result = cross_validate_finetune(labeler, corpus, k=args.folds, finetune_fraction=args.fraction, seed=seed)
        banner("STACKER FINE-TUNING")
        print(f"Before fine-tuning: accuracy {100 * before.accuracy:.1f}%, macro-F1 {100 * before.macro_f1:.1f}")
        print(result.summary())
        print(BANNER)
        return 0

    if not args.out:
        raise ConfigError("finetune needs --out for the fine-tuned bundle (or --folds for repeated evaluation)")
    if not 0.0 < args.fraction <= 1.0:
        raise ConfigError(f"--fraction must be in (0, 1], got {args.fraction}")
    tune, _, test = split_annotated(corpus, (args.fraction, 0.0, 1.0 - args.fraction), seed)
    if not tune or not test:
        tune, test = corpus, []
    before = labeler.evaluate(test, "stacking") if test else None
    labeler.finetune(tune, dataset_id=args.dataset_id or Path(args.input).stem)
    labeler.save(args.out)

    banner("STACKER FINE-TUNING")
    print(f"Fine-tuned on {len(tune)} reports; base models unchanged")
    if before is not None:
        after = labeler.evaluate(test, "stacking")
        print(f"Remaining {len(test)} reports: accuracy {100 * before.accuracy:.1f}% -> {100 * after.accuracy:.1f}%")
    print(f"Model bundle: {args.out}")
    print(BANNER)
    return 0


def cmd_grad_check(args) -> int:
    seed = args.seed or 0
    corpus = generate_synthetic_corpus(n_reports=4, seed=seed)
    vocab = build_vocab([item.report for item in corpus])
    table = random_embeddings(vocab, args.dim, seed=seed, trainable=True)
    rules = load_rules("mgb")
    examples = [e for item in corpus for e in build_examples(item.report, vocab, rules,
                                                             [labeled.label for labeled in item.labels])]
    sample = examples[:args.batch]

    banner("GRADIENT CHECK")
    failed = []
    for name in NEURAL_MODELS:
        error = grad_check(create_model(name, table, seed=seed), sample, seed=seed)
        limit = GRAD_CHECK_LIMITS[name]
        status = "ok" if error < limit else "FAILED"
        if error >= limit:
            failed.append(name)
        print(f"{name:<12} max relative error {error:.3e} (limit {limit:.0e}) {status}")
    print(BANNER)
    return 1 if failed else 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="section-labeler",
                                     description="Label radiology report sentences with their section")
    parser.add_argument("--log-level", default=None, help="Logging level (default INFO or $SECTION_LABELER_LOG_LEVEL)")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        p.add_argument("--seed", type=int, default=None, help="Seed for every random choice")
        if config:
            p.add_argument("--config", default=None, help="YAML config file")
        return p

    p = common(sub.add_parser("weak-label", help="Weak-label a directory of .txt reports"))
    p.add_argument("--in", dest="input", required=True, help="Directory of .txt reports")
    p.add_argument("--out", required=True, help="Output labeled JSONL")
    p.add_argument("--rules", default=None, help="Rule set (mgb, mimic) or rule file")
    p.set_defaults(func=cmd_weak_label)

    p = common(sub.add_parser("gen-synthetic", help="Generate gold-labeled synthetic reports"), config=False)
    p.add_argument("--out", required=True, help="Output labeled JSONL")
    p.add_argument("--n", type=int, default=500, help="Number of reports")
    p.add_argument("--family", default="default", help="Template family")
    p.add_argument("--header-dropout", type=float, default=None, help="Override the family's header dropout")
    p.add_argument("--templates", default=None, help="Template YAML (defaults to the shipped file)")
    p.set_defaults(func=cmd_gen_synthetic)

    p = common(sub.add_parser("train", help="Train the full pipeline and write a model bundle"))
    p.add_argument("--in", dest="input", required=True, help="Labeled JSONL, BRAT directory or .txt directory")
    p.add_argument("--out", required=True, help="Output model bundle")
    p.add_argument("--rules", default=None, help="Rule set used to weak-label unlabeled reports")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("evaluate", help="Score one system on a labeled corpus"))
    p.add_argument("--model", required=True, help="Model bundle")
    p.add_argument("--in", dest="input", required=True, help="Labeled corpus")
    p.add_argument("--system", default="stacking", choices=SYSTEMS)
    p.add_argument("--out", default=None, help="Write the metrics report as JSON")
    p.set_defaults(func=cmd_evaluate)

    p = common(sub.add_parser("label", help="Print every sentence prefixed by its predicted section"))
    p.add_argument("--model", required=True, help="Model bundle")
    p.add_argument("--in", dest="input", required=True, help="Report file or directory of .txt reports")
    p.add_argument("--system", default="stacking", choices=SYSTEMS)
    p.add_argument("--out", default=None, help="Also write predictions as labeled JSONL")
    p.set_defaults(func=cmd_label)

    p = common(sub.add_parser("cross-validate", help="k-fold cross-validation of the full pipeline"))
    p.add_argument("--in", dest="input", required=True, help="Labeled corpus")
    p.add_argument("--folds", type=int, default=10)
    p.add_argument("--system", default="stacking", choices=SYSTEMS)
    p.add_argument("--rules", default=None, help="Rule set used to weak-label unlabeled reports")
    p.add_argument("--out", default=None, help="Write per-fold results as JSON")
    p.set_defaults(func=cmd_cross_validate)

    p = common(sub.add_parser("finetune", help="Re-fit only the stacker on a new domain"))
    p.add_argument("--model", required=True, help="Model bundle")
    p.add_argument("--in", dest="input", required=True, help="Labeled target-domain corpus")
    p.add_argument("--out", default=None, help="Output fine-tuned bundle")
    p.add_argument("--fraction", type=float, default=0.2, help="Share of reports used for fine-tuning")
    p.add_argument("--folds", type=int, default=0, help="Repeat fine-tune/evaluate this many times instead")
    p.add_argument("--dataset-id", default=None, help="Recorded in the bundle (defaults to the corpus name)")
    p.set_defaults(func=cmd_finetune)

    p = common(sub.add_parser("grad-check", help="Verify every model's gradients by finite differences"),
               config=False)
    p.add_argument("--dim", type=int, default=8, help="Embedding dimension of the checked models")
    p.add_argument("--batch", type=int, default=4, help="Sentences per checked batch")
    p.set_defaults(func=cmd_grad_check)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point for the command line"""
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        setup_logging(args.log_level)
        return args.func(args)
    except SectionLabelerError as e:
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except KeyboardInterrupt:
        print("Interrupted", file=sys.stderr)
        return 130


if __name__ == "__main__":
    sys.exit(main())
