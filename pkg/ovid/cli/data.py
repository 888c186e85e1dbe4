"""
Data sub-commands: ingest, mine, split, convert, featurize, stats
"""

import json
import logging
from pathlib import Path

from ovid.cli.common import add_out, add_seed, parse_ratios
from ovid.config import config_loader, settings
from ovid.core.featurizer import EditorVocabulary, Featurizer, MapFeatures, apply_norm, fit_norm
from ovid.core.revert_miner import convert_published, mine_dataset, split_user_disjoint
from ovid.core.statistics import dataset_statistics
from ovid.errors import DataError, UsageError
from ovid.models.features import D_EDIT, D_USER
from ovid.services.dataset_io import (
    DATASET_FILE,
    FEATURES_FILE,
    STORE_FILE,
    FeatureFile,
    load_dataset,
    load_features,
    read_published_labels,
    resolve_input,
    save_dataset,
    save_features,
)
from ovid.services.history_parser import ingest
from ovid.services.store import ChangesetStore, load_store, save_store

logger = logging.getLogger(__name__)

STATS_FILE = "stats.json"


def register(subparsers) -> None:
    p = subparsers.add_parser("ingest", help="Build a changeset store from XML history")
    p.add_argument("--changesets", type=Path, required=True, help="Changeset dump XML (.xml or .gz)")
    p.add_argument("--osc", type=Path, nargs="*", default=[], help="osmChange files, oldest first")
    p.add_argument("--users", type=Path, help="OSM user XML with account_created dates")
    add_out(p)
    p.set_defaults(handler=run_ingest)

    p = subparsers.add_parser("mine", help="Mine a balanced labeled dataset from vandalism reverts")
    p.add_argument("--store", type=Path, required=True)
    add_seed(p)
    add_out(p)
    p.set_defaults(handler=run_mine)

    p = subparsers.add_parser("split", help="Split a dataset user-disjointly")
    p.add_argument("--dataset", type=Path, required=True)
    p.add_argument("--ratios", default="0.70,0.10,0.20", help="train,validation,test")
    add_seed(p)
    add_out(p)
    p.set_defaults(handler=run_split)

    p = subparsers.add_parser("convert", help="Convert a published label CSV into a dataset")
    p.add_argument("--labels", type=Path, required=True, help="CSV with changeset_id,label[,user_id]")
    p.add_argument("--source", default="OSM-Manual", help="Provenance name recorded per example")
    p.add_argument("--store", type=Path, help="Store used to look up missing authors")
    add_out(p)
    p.set_defaults(handler=run_convert)

    p = subparsers.add_parser("featurize", help="Compute normalized features for a dataset")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--split", type=Path, required=True, help="Dataset, normally a split one")
    p.add_argument(
        "--norm-from",
        type=Path,
        help="Reuse normalization of an existing feature file instead of fitting on train",
    )
    add_out(p)
    p.set_defaults(handler=run_featurize)

    p = subparsers.add_parser("stats", help="Describe a dataset against its store")
    p.add_argument("--store", type=Path, required=True)
    p.add_argument("--dataset", type=Path, required=True)
    add_out(p)
    p.set_defaults(handler=run_stats)


def run_ingest(args, ctx) -> None:
    store = ChangesetStore()
    counts = ingest(store, args.changesets, args.osc, args.users)
    ctx.out_dir = args.out
    save_store(store, args.out / STORE_FILE)
    ctx.inputs = {"changesets": str(args.changesets), "osc": [str(p) for p in args.osc]}
    ctx.outputs.append(STORE_FILE)
    logger.info("Ingest finished", extra=counts)


def run_mine(args, ctx) -> None:
    store = load_store(resolve_input(args.store, STORE_FILE))
    examples = mine_dataset(store, args.seed)
    ctx.out_dir = args.out
    ctx.seeds["sample"] = args.seed
    save_dataset(args.out / DATASET_FILE, examples, seed=args.seed)
    ctx.outputs.append(DATASET_FILE)


def run_split(args, ctx) -> None:
    dataset = load_dataset(resolve_input(args.dataset, DATASET_FILE))
    split = split_user_disjoint(dataset.examples, parse_ratios(args.ratios), args.seed)
    ctx.out_dir = args.out
    ctx.seeds["split"] = args.seed
    save_dataset(args.out / DATASET_FILE, dataset.examples, split=split, source=dataset.source)
    ctx.outputs.append(DATASET_FILE)


def run_convert(args, ctx) -> None:
    store = load_store(resolve_input(args.store, STORE_FILE)) if args.store else None
    rows = read_published_labels(args.labels, args.source)
    examples = convert_published(rows, args.source, store)
    ctx.out_dir = args.out
    save_dataset(args.out / DATASET_FILE, examples, source=args.source)
    ctx.outputs.append(DATASET_FILE)


def run_featurize(args, ctx) -> None:
    store = load_store(resolve_input(args.store, STORE_FILE))
    dataset = load_dataset(resolve_input(args.split, DATASET_FILE))
    vocabulary = EditorVocabulary(config_loader.load_editor_vocabulary())
    featurizer = Featurizer(
        store,
        vocabulary=vocabulary,
        map_features=MapFeatures(config_loader.load_map_features()),
        top12_mode=settings.top12_mode,
    )

    raw = []
    for example in dataset.examples:
        changeset = store.changeset(example.changeset_id)
        if changeset is None:
            raise DataError(f"Dataset changeset {example.changeset_id} is not in the store")
        raw.append(
            featurizer.bundle(
                changeset,
                label=example.label.as_int,
                split=dataset.assignment.get(example.changeset_id),
            )
        )

    if args.norm_from is not None:
        norm = load_features(resolve_input(args.norm_from, FEATURES_FILE)).norm
    elif dataset.assignment:
        norm = fit_norm([b for b in raw if b.split == "train"])
    else:
        raise UsageError("Dataset has no split; run split first or pass --norm-from")

    flagged = sum(b.missing_history for b in raw)
    if flagged:
        logger.warning(
            f"{flagged} changesets have edits without previous versions",
            extra={"flagged": flagged},
        )

    features = FeatureFile(
        bundles=[apply_norm(b, norm) for b in raw],
        norm=norm,
        d_c=featurizer.d_c,
        d_u=D_USER,
        d_e=D_EDIT,
        vocabulary_hash=vocabulary.hash,
        top12_mode=featurizer.top12_mode,
    )
    ctx.out_dir = args.out
    save_features(args.out / FEATURES_FILE, features)
    ctx.outputs.append(FEATURES_FILE)


def run_stats(args, ctx) -> None:
    store = load_store(resolve_input(args.store, STORE_FILE))
    dataset = load_dataset(resolve_input(args.dataset, DATASET_FILE))
    stats = dataset_statistics(dataset.examples, store)
    ctx.out_dir = args.out
    args.out.mkdir(parents=True, exist_ok=True)
    (args.out / STATS_FILE).write_text(
        json.dumps(stats.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    ctx.outputs.append(STATS_FILE)
    print(json.dumps(stats.model_dump(), indent=2, sort_keys=True))
