"""
Model sub-commands: train, tune, ablate
"""

import logging
from pathlib import Path

from ovid.cli.common import add_model_config, add_out, add_seed, load_model_config
from ovid.core.model import ABLATION_VARIANTS, ablate
from ovid.core.trainer import TrainingResult, train
from ovid.core.tuner import DEFAULT_TRIALS, AblationRow, random_search, run_ablation_study, score_model
from ovid.errors import UsageError
from ovid.services.checkpoint import CHECKPOINT_FILE, checkpoint_from_model, save_checkpoint
from ovid.services.dataset_io import FEATURES_FILE, FeatureFile, load_features, resolve_input
from ovid.services.reports import (
    REPORT_RECORDS,
    REPORT_TABLE,
    EvalReport,
    EvalRow,
    write_eval_report,
    write_records,
)

logger = logging.getLogger(__name__)

TRAINING_LOG = "training_log.jsonl"
TRIALS_FILE = "trials.jsonl"
BEST_CONFIG = "best.conf"


def register(subparsers) -> None:
    p = subparsers.add_parser("train", help="Train a model with early stopping")
    p.add_argument("--features", type=Path, required=True)
    add_model_config(p)
    add_seed(p)
    add_out(p)
    p.set_defaults(handler=run_train)

    p = subparsers.add_parser("tune", help="Random hyperparameter search")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--trials", type=int, default=DEFAULT_TRIALS)
    add_model_config(p)
    add_seed(p)
    add_out(p)
    p.set_defaults(handler=run_tune)

    p = subparsers.add_parser("ablate", help="Train and evaluate ablation variants")
    p.add_argument("--features", type=Path, required=True)
    p.add_argument(
        "--variant",
        required=True,
        type=_variant,
        choices=[*ABLATION_VARIANTS, "all"],
        help="Variant to train (write --variant=-User, or drop the dash), or all",
    )
    add_model_config(p)
    add_seed(p)
    add_out(p)
    p.set_defaults(handler=run_ablate)


def _variant(text: str) -> str:
    return text if text.startswith("-") or text == "all" else f"-{text}"


def _save_model(result: TrainingResult, features: FeatureFile, out: Path, ctx) -> None:
    reference = features.part("test") or features.part("validation")
    cp = checkpoint_from_model(
        result.model,
        features.norm,
        features.vocabulary_hash,
        reference,
        top12_mode=features.top12_mode,
        training={"epochs_run": result.epochs_run, "best_epoch": result.best_epoch},
    )
    save_checkpoint(cp, out / CHECKPOINT_FILE)
    write_records(out / TRAINING_LOG, result.log)
    ctx.outputs.extend([CHECKPOINT_FILE, TRAINING_LOG])


def run_train(args, ctx) -> None:
    features = load_features(resolve_input(args.features, FEATURES_FILE))
    config = load_model_config(args)
    ctx.seeds["model"] = config.seed
    result = train(features.require("train"), features.require("validation"), config, d_c=features.d_c)
    ctx.out_dir = args.out
    _save_model(result, features, args.out, ctx)


def run_tune(args, ctx) -> None:
    if args.trials < 1:
        raise UsageError("--trials must be at least 1")
    features = load_features(resolve_input(args.features, FEATURES_FILE))
    base = load_model_config(args)
    ctx.seeds["search"] = args.seed
    best, trials, result = random_search(
        features.require("train"),
        features.require("validation"),
        n_trials=args.trials,
        seed=args.seed,
        base=base,
    )
    ctx.out_dir = args.out
    write_records(args.out / TRIALS_FILE, trials)
    (args.out / BEST_CONFIG).write_text(best.config.to_flat(), encoding="utf-8")
    ctx.outputs.extend([TRIALS_FILE, BEST_CONFIG])
    _save_model(result, features, args.out, ctx)
    print(best.config.to_flat(), end="")


def run_ablate(args, ctx) -> None:
    features = load_features(resolve_input(args.features, FEATURES_FILE))
    config = load_model_config(args)
    ctx.seeds["model"] = config.seed
    train_set = features.require("train")
    val_set = features.require("validation")
    test_set = features.require("test")
    ctx.out_dir = args.out

    if args.variant == "all":
        rows = run_ablation_study(train_set, val_set, test_set, config)
    else:
        result = train(train_set, val_set, ablate(config, args.variant), d_c=features.d_c)
        counts, scored = score_model(result.model, test_set)
        rows = [AblationRow(variant=args.variant, counts=counts, metrics=scored, epochs=result.epochs_run)]
        _save_model(result, features, args.out, ctx)

    report = EvalReport(
        rows=[
            EvalRow(system=row.variant, split="test", examples=len(test_set), counts=row.counts, metrics=row.metrics)
            for row in rows
        ]
    )
    write_eval_report(args.out, report)
    ctx.outputs.extend([REPORT_TABLE, REPORT_RECORDS])
    print(report.table(), end="")
