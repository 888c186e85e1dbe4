"""
Dataset statistics
Per-class medians of edit counts, user counts and covered time span.
"""

import logging
from datetime import datetime, timezone
from typing import Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel

from ovid.models.dataset import Label, LabeledExample
from ovid.models.osm import EditOp, ObjectType
from ovid.services.store import ChangesetStore

logger = logging.getLogger(__name__)

MEDIAN_FIELDS = ("creates", "modifications", "deletes", "nodes", "ways", "relations", "edits")


class GroupStats(BaseModel):
    changesets: int
    users: int
    median_creates: float = 0.0
    median_modifications: float = 0.0
    median_deletes: float = 0.0
    median_nodes: float = 0.0
    median_ways: float = 0.0
    median_relations: float = 0.0
    median_edits: float = 0.0


class DatasetStats(BaseModel):
    all: GroupStats
    vandalism: GroupStats
    regular: GroupStats
    first_change: Optional[str] = None
    last_change: Optional[str] = None
    missing: int = 0


def _group(rows: List[Dict[str, int]], users: set) -> GroupStats:
    stats = GroupStats(changesets=len(rows), users=len(users))
    if rows:
        for name in MEDIAN_FIELDS:
            setattr(stats, f"median_{name}", float(np.median([r[name] for r in rows])))
    return stats


def _iso(t: int) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def dataset_statistics(examples: Sequence[LabeledExample], store: ChangesetStore) -> DatasetStats:
    """Examples whose changeset is missing from the store are counted, not described"""
    rows: Dict[Label, List[Dict[str, int]]] = {Label.VANDALISM: [], Label.REGULAR: []}
    users: Dict[Label, set] = {Label.VANDALISM: set(), Label.REGULAR: set()}
    times: List[int] = []
    missing = 0

    for example in examples:
        changeset = store.changeset(example.changeset_id)
        if changeset is None:
            missing += 1
            continue
        ops = [e.op for e in changeset.edits]
        types = [e.object.type for e in changeset.edits]
        rows[example.label].append(
            {
                "creates": ops.count(EditOp.CREATE),
                "modifications": ops.count(EditOp.MODIFY),
                "deletes": ops.count(EditOp.DELETE),
                "nodes": types.count(ObjectType.NODE),
                "ways": types.count(ObjectType.WAY),
                "relations": types.count(ObjectType.RELATION),
                "edits": len(ops),
            }
        )
        users[example.label].add(changeset.uid)
        times.append(changeset.t)

    if missing:
        logger.warning(f"{missing} examples reference changesets missing from the store", extra={"missing": missing})

    return DatasetStats(
        all=_group(
            rows[Label.VANDALISM] + rows[Label.REGULAR],
            users[Label.VANDALISM] | users[Label.REGULAR],
        ),
        vandalism=_group(rows[Label.VANDALISM], users[Label.VANDALISM]),
        regular=_group(rows[Label.REGULAR], users[Label.REGULAR]),
        first_change=_iso(min(times)) if times else None,
        last_change=_iso(max(times)) if times else None,
        missing=missing,
    )
