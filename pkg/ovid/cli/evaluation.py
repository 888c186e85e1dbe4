"""
Evaluation sub-commands: eval, sweep, predict
"""

import json
import logging
from pathlib import Path
from typing import List

from ovid.cli.common import add_out, add_seed, check_compatible
from ovid.config import config_loader
from ovid.core.baselines import forest_baseline, grid_search_rules, rule_baseline
from ovid.core.evaluation import (
    DEFAULT_SWEEP_POINTS,
    confusion,
    metrics,
    pr_sweep,
    random_baseline,
    threshold_predictions,
)
from ovid.core.featurizer import EditorVocabulary, Featurizer, MapFeatures, apply_norm, denormalize
from ovid.core.model import classify
from ovid.errors import DataError, DimMismatch, EmptyEvaluation, UsageError
from ovid.models.features import FeatureBundle
from ovid.services.checkpoint import CHECKPOINT_FILE, load_checkpoint
from ovid.services.dataset_io import FEATURES_FILE, STORE_FILE, FeatureFile, load_features, resolve_input
from ovid.services.reports import (
    PR_CURVE_FILE,
    REPORT_RECORDS,
    REPORT_TABLE,
    EvalReport,
    EvalRow,
    write_eval_report,
    write_pr_curve,
)
from ovid.services.store import load_store

logger = logging.getLogger(__name__)

BASELINES = ("random", "rules", "forest")
RULES_NOTE = "approximate rule set over this toolkit's own edit features"


def register(subparsers) -> None:
    p = subparsers.add_parser("eval", help="Evaluate a checkpoint and baselines")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--split", default="test", choices=["train", "validation", "test"])
    p.add_argument("--test-features", type=Path, help="Evaluate on another feature file instead")
    p.add_argument("--baselines", default="random,rules", help="Comma list of random, rules, forest")
    add_seed(p)
    add_out(p)
    p.set_defaults(handler=run_eval)

    p = subparsers.add_parser("sweep", help="Precision/recall over the classification threshold")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--features", type=Path, required=True)
    p.add_argument("--split", default="test", choices=["train", "validation", "test"])
    p.add_argument("--points", type=int, default=DEFAULT_SWEEP_POINTS)
    add_out(p)
    p.set_defaults(handler=run_sweep)

    p = subparsers.add_parser("predict", help="Score a single changeset")
    p.add_argument("--checkpoint", type=Path, required=True)
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--changeset-id", type=int, required=True)
    add_out(p, required=False)
    p.set_defaults(handler=run_predict)


def _parse_baselines(text: str) -> List[str]:
    names = [n.strip() for n in text.split(",") if n.strip()]
    unknown = [n for n in names if n not in BASELINES]
    if unknown:
        raise UsageError(f"Unknown baselines: {', '.join(unknown)}; choose from {', '.join(BASELINES)}")
    return names


def _row(system: str, split: str, predicted, bundles: List[FeatureBundle], note=None) -> EvalRow:
    counts = confusion(predicted, [b.label for b in bundles])
    return EvalRow(
        system=system, split=split, examples=len(bundles), counts=counts, metrics=metrics(counts), note=note
    )


def _eval_set(args, features: FeatureFile):
    """(bundles, split name, their feature file)"""
    if args.test_features is not None:
        path = resolve_input(args.test_features, FEATURES_FILE)
        other = load_features(path)
        if not other.bundles:
            raise EmptyEvaluation(f"{path} holds no examples")
        return other.bundles, path.parent.name or "external", other
    return features.require(args.split), args.split, features


def run_eval(args, ctx) -> None:
    baselines = _parse_baselines(args.baselines)
    cp = load_checkpoint(resolve_input(args.checkpoint, CHECKPOINT_FILE))
    features = load_features(resolve_input(args.features, FEATURES_FILE))
    bundles, split, source = _eval_set(args, features)
    check_compatible(cp, source, args.test_features or args.features)
    if any(b.label is None for b in bundles):
        raise DataError("Evaluation examples must be labeled")

    model = cp.build_model()
    rows = [_row("OVID", split, threshold_predictions(model.predict_many(bundles), cp.config.th_class), bundles)]
    ctx.seeds["baselines"] = args.seed

    if "random" in baselines:
        rows.append(_row("Random", split, random_baseline(len(bundles), args.seed), bundles))
    if "rules" in baselines:
        tuning = [denormalize(b, features.norm) for b in features.require("train") + features.require("validation")]
        thresholds, _ = grid_search_rules(tuning)
        raw = [denormalize(b, source.norm) for b in bundles]
        rows.append(_row("Rules", split, rule_baseline(raw, thresholds), bundles, note=RULES_NOTE))
    if "forest" in baselines:
        rows.append(_row("Forest", split, forest_baseline(features.require("train"), bundles, args.seed), bundles))

    report = EvalReport(rows=rows)
    ctx.out_dir = args.out
    write_eval_report(args.out, report)
    ctx.outputs.extend([REPORT_TABLE, REPORT_RECORDS])
    print(report.table(), end="")


def run_sweep(args, ctx) -> None:
    if args.points < 1:
        raise UsageError("--points must be at least 1")
    cp = load_checkpoint(resolve_input(args.checkpoint, CHECKPOINT_FILE))
    features = load_features(resolve_input(args.features, FEATURES_FILE))
    check_compatible(cp, features, args.features)
    bundles = features.require(args.split)

    scores = cp.build_model().predict_many(bundles)
    curve = pr_sweep([(float(s), b.label) for s, b in zip(scores, bundles)], args.points)
    ctx.out_dir = args.out
    write_pr_curve(args.out / PR_CURVE_FILE, curve)
    ctx.outputs.append(PR_CURVE_FILE)


def run_predict(args, ctx) -> None:
    cp = load_checkpoint(resolve_input(args.checkpoint, CHECKPOINT_FILE))
    store = load_store(resolve_input(args.store, STORE_FILE))
    changeset = store.changeset(args.changeset_id)
    if changeset is None:
        raise DataError(f"Changeset {args.changeset_id} is not in the store")

    vocabulary = EditorVocabulary(config_loader.load_editor_vocabulary())
    if vocabulary.hash != cp.vocabulary_hash:
        raise DimMismatch("Editor vocabulary differs from the checkpoint's")
    featurizer = Featurizer(
        store,
        vocabulary=vocabulary,
        map_features=MapFeatures(config_loader.load_map_features()),
        top12_mode=cp.top12_mode,
    )
    bundle = apply_norm(featurizer.bundle(changeset), cp.norm)
    model = cp.build_model()
    y_pred = model.predict(bundle)
    result = {
        "changeset_id": changeset.id,
        "y_pred": y_pred,
        "label": classify(y_pred, cp.config.th_class).value,
        "edit_branch": model.uses_edits(bundle),
    }
    print(json.dumps(result, sort_keys=True))

    if args.out is not None:
        ctx.out_dir = args.out
        args.out.mkdir(parents=True, exist_ok=True)
        (args.out / "prediction.json").write_text(json.dumps(result, sort_keys=True) + "\n", encoding="utf-8")
        ctx.outputs.append("prediction.json")
