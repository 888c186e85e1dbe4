"""
Dataset and feature files

Both use the JSON-lines container of the store with their own schema name.
An example record may carry the split it was assigned to; a feature file
header carries the normalization statistics and feature dimensions.
"""

import csv
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from ovid.errors import DataError, EmptySplit, StoreIoError, UsageError
from ovid.models.dataset import (
    SPLIT_NAMES,
    DatasetManifest,
    DatasetSplit,
    Label,
    LabeledExample,
)
from ovid.models.features import FeatureBundle, NormStats
from ovid.services.jsonl import JsonlReader, write_jsonl

logger = logging.getLogger(__name__)

DATASET_SCHEMA = "ovid-dataset"
DATASET_VERSION = 1
FEATURES_SCHEMA = "ovid-features"
FEATURES_VERSION = 1

DATASET_FILE = "dataset.jsonl"
FEATURES_FILE = "features.jsonl"
STORE_FILE = "store.jsonl"


def resolve_input(path: str | Path, filename: str) -> Path:
    """Accept either an output directory or the artifact file inside it"""
    path = Path(path)
    if path.is_dir():
        path = path / filename
    if not path.exists():
        raise UsageError(f"Input not found: {path}")
    return path


class DatasetFile(BaseModel):
    """Contents of a dataset file: examples, optional split assignment and the header manifest"""

    examples: List[LabeledExample]
    assignment: Dict[int, str] = {}
    manifest: DatasetManifest = DatasetManifest()

    @property
    def source(self) -> str:
        return self.manifest.source


def dataset_counts(examples: Sequence[LabeledExample], assignment: Dict[int, str]) -> Dict[str, int]:
    counts = {
        "examples": len(examples),
        "vandalism": sum(e.label == Label.VANDALISM for e in examples),
        "regular": sum(e.label == Label.REGULAR for e in examples),
    }
    if assignment:
        for name in SPLIT_NAMES:
            counts[name] = sum(1 for s in assignment.values() if s == name)
    return counts


def save_dataset(
    path: str | Path,
    examples: Sequence[LabeledExample],
    seed: Optional[int] = None,
    split: Optional[DatasetSplit] = None,
    source: str = "mined",
) -> None:
    """Write examples ordered by changeset id, with their split when given"""
    assignment = split.assignment() if split is not None else {}
    manifest = DatasetManifest(
        seed=split.seed if split is not None else seed,
        ratios=split.ratios if split is not None else None,
        counts=dataset_counts(examples, assignment),
        source=source,
    )
    header = {
        "schema": DATASET_SCHEMA,
        "version": DATASET_VERSION,
        **manifest.model_dump(mode="json"),
    }
    records = (
        {
            "kind": "example",
            **e.model_dump(mode="json"),
            "split": assignment.get(e.changeset_id),
        }
        for e in sorted(examples, key=lambda e: e.changeset_id)
    )
    count = write_jsonl(path, header, records)
    logger.info(f"Saved dataset with {count} examples", extra={"path": str(path)})


def load_dataset(path: str | Path) -> DatasetFile:
    reader = JsonlReader(path, DATASET_SCHEMA, DATASET_VERSION)
    examples: List[LabeledExample] = []
    assignment: Dict[int, str] = {}
    seen = set()
    for index, offset, record in reader:
        split = record.pop("split", None)
        record.pop("kind", None)
        try:
            example = LabeledExample.model_validate(record)
        except ValidationError as e:
            raise StoreIoError(f"{path}: invalid example: {e}", index, offset) from e
        if example.changeset_id in seen:
            raise StoreIoError(
                f"{path}: changeset {example.changeset_id} listed twice", index, offset
            )
        seen.add(example.changeset_id)
        if split is not None:
            if split not in SPLIT_NAMES:
                raise StoreIoError(f"{path}: unknown split {split!r}", index, offset)
            assignment[example.changeset_id] = split
        examples.append(example)

    if assignment and len(assignment) != len(examples):
        raise DataError(f"{path}: only some examples carry a split")

    header = reader.header
    try:
        manifest = DatasetManifest.model_validate(
            {k: v for k, v in header.items() if k in DatasetManifest.model_fields}
        )
    except ValidationError as e:
        raise DataError(f"{path}: invalid dataset header: {e}") from e
    return DatasetFile(examples=examples, assignment=assignment, manifest=manifest)


class FeatureFile(BaseModel):
    """Normalized feature bundles plus the facts a checkpoint must agree with"""

    bundles: List[FeatureBundle]
    norm: NormStats
    d_c: int
    d_u: int
    d_e: int
    vocabulary_hash: str
    top12_mode: str = "additions"

    def part(self, name: str) -> List[FeatureBundle]:
        return [b for b in self.bundles if b.split == name]

    def require(self, name: str) -> List[FeatureBundle]:
        bundles = self.part(name)
        if not bundles:
            raise EmptySplit(f"Feature file has no {name} examples")
        return bundles


def _bundle_record(bundle: FeatureBundle) -> dict:
    return {
        "kind": "bundle",
        "changeset_id": bundle.changeset_id,
        "user_id": bundle.user_id,
        "label": bundle.label,
        "split": bundle.split,
        "x_c": bundle.x_c.tolist(),
        "x_u": bundle.x_u.tolist(),
        "m_e": bundle.m_e.tolist(),
        "n_edits": bundle.n_edits,
        "missing_history": bundle.missing_history,
    }


def save_features(path: str | Path, features: FeatureFile) -> None:
    header = {
        "schema": FEATURES_SCHEMA,
        "version": FEATURES_VERSION,
        "d_c": features.d_c,
        "d_u": features.d_u,
        "d_e": features.d_e,
        "vocabulary_hash": features.vocabulary_hash,
        "top12_mode": features.top12_mode,
        "norm": features.norm.model_dump(),
    }
    count = write_jsonl(path, header, (_bundle_record(b) for b in features.bundles))
    logger.info(f"Saved {count} feature bundles", extra={"path": str(path)})


def load_features(path: str | Path) -> FeatureFile:
    reader = JsonlReader(path, FEATURES_SCHEMA, FEATURES_VERSION)
    header = reader.header
    d_e = header["d_e"]
    bundles = []
    for index, offset, record in reader:
        try:
            m_e = np.asarray(record["m_e"], dtype=np.float64).reshape(d_e, record["n_edits"])
            bundles.append(
                FeatureBundle(
                    changeset_id=record["changeset_id"],
                    user_id=record["user_id"],
                    label=record["label"],
                    split=record["split"],
                    x_c=record["x_c"],
                    x_u=record["x_u"],
                    m_e=m_e,
                    missing_history=record["missing_history"],
                )
            )
        except (ValidationError, KeyError, ValueError) as e:
            raise StoreIoError(f"{path}: invalid feature record: {e}", index, offset) from e

    return FeatureFile(
        bundles=bundles,
        norm=NormStats.model_validate(header["norm"]),
        d_c=header["d_c"],
        d_u=header["d_u"],
        d_e=d_e,
        vocabulary_hash=header["vocabulary_hash"],
        top12_mode=header.get("top12_mode", "additions"),
    )


_LABEL_ALIASES = {
    "1": Label.VANDALISM,
    "vandalism": Label.VANDALISM,
    "true": Label.VANDALISM,
    "0": Label.REGULAR,
    "regular": Label.REGULAR,
    "false": Label.REGULAR,
}


def read_published_labels(path: str | Path, source: str) -> List[Tuple[int, Label, Optional[int]]]:
    """
    Rows of a published label CSV

    Columns: changeset_id, label and optionally user_id.
    """
    rows = []
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.DictReader(f)
        if reader.fieldnames is None or not {"changeset_id", "label"} <= set(reader.fieldnames):
            raise DataError(f"{path}: expected columns changeset_id,label[,user_id]")
        for lineno, row in enumerate(reader, start=2):
            label = _LABEL_ALIASES.get(row["label"].strip().lower())
            if label is None:
                raise DataError(f"{path}:{lineno}: unknown label {row['label']!r}")
            try:
                changeset_id = int(row["changeset_id"])
                user = row.get("user_id")
                user_id = int(user) if user not in (None, "") else None
            except ValueError as e:
                raise DataError(f"{path}:{lineno}: {e}") from e
            rows.append((changeset_id, label, user_id))
    logger.info(f"Read {len(rows)} published labels", extra={"path": str(path), "source": source})
    return rows


