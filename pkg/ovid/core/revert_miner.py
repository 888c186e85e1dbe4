"""
Revert Miner
Extracts vandalism ground truth from reverts, samples negatives and splits
the labeled examples user-disjointly.
"""

import logging
import re
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from ovid.errors import InsufficientPopulation, UsageError
from ovid.models.dataset import (
    SPLIT_NAMES,
    DatasetSplit,
    Label,
    LabeledExample,
    Provenance,
    ProvenanceKind,
)
from ovid.models.osm import Changeset, EditOp
from ovid.services.store import ChangesetStore

logger = logging.getLogger(__name__)

VANDALISM_TERM = "vandalism"

# "changeset 12", "changesets 10, 11 and 12", "changeset #5", "changeset: 7", ".../changeset/9"
_MENTION = re.compile(
    r"\bchangesets?\b((?:\s*(?:,|:|/|#|&|\band\b)?\s*#?\d+\b)+)",
    re.IGNORECASE,
)
_NUMBER = re.compile(r"\d+")


def find_vandalism_reverts(store: ChangesetStore) -> List[Changeset]:
    """Changesets whose comment mentions vandalism, any case"""
    reverts = [c for c in store.changesets() if VANDALISM_TERM in c.comment.casefold()]
    logger.info(f"Found {len(reverts)} vandalism reverts", extra={"reverts": len(reverts)})
    return reverts


def mentioned_ids(comment: str) -> List[int]:
    """Integers listed after a 'changeset(s)' token, in comment order"""
    ids = []
    for match in _MENTION.finditer(comment):
        ids.extend(int(n) for n in _NUMBER.findall(match.group(1)))
    return ids


def attribute_explicit(revert: Changeset, store: ChangesetStore) -> Set[int]:
    """Changesets the revert comment names explicitly, excluding the reverter's own"""
    attributed = set()
    for changeset_id in mentioned_ids(revert.comment):
        if changeset_id == revert.id:
            continue
        target = store.changeset(changeset_id)
        if target is None or target.uid == revert.uid:
            continue
        attributed.add(changeset_id)
    return attributed


def attribute_by_deletion(revert: Changeset, store: ChangesetStore) -> Dict[int, Tuple[int, str]]:
    """
    Changesets of the single non-reverter author of each object the revert deletes

    Objects with zero or several other authors contribute nothing.

    Returns:
        Dict of {changeset_id: (object id, object type)}
    """
    attributed: Dict[int, Tuple[int, str]] = {}
    for edit in revert.edits:
        if edit.op != EditOp.DELETE:
            continue
        key = (edit.object.id, edit.object.type)
        prior = [
            v
            for v in store.versions(key)
            if v.ver < edit.ver and v.changeset_id != revert.id
        ]
        authors = {v.uid for v in prior} - {revert.uid}
        if len(authors) != 1 or None in authors:
            continue

        (author,) = authors
        for version in prior:
            if version.uid == author and version.changeset_id in store:
                attributed.setdefault(version.changeset_id, (key[0], key[1].value))
    return attributed


def mine_positives(store: ChangesetStore) -> Tuple[List[LabeledExample], Set[int]]:
    """
    Vandalism examples from all reverts, deduplicated by changeset id

    Explicit mentions take precedence over deletion attribution. Revert
    changesets never become examples.

    Returns:
        (positives ordered by changeset id, revert ids)
    """
    reverts = find_vandalism_reverts(store)
    revert_ids = {r.id for r in reverts}
    positives: Dict[int, LabeledExample] = {}

    for revert in reverts:
        for changeset_id in sorted(attribute_explicit(revert, store)):
            if changeset_id in revert_ids or changeset_id in positives:
                continue
            positives[changeset_id] = LabeledExample(
                changeset_id=changeset_id,
                label=Label.VANDALISM,
                provenance=Provenance(kind=ProvenanceKind.EXPLICIT_MENTION, revert_id=revert.id),
                user_id=store.changeset(changeset_id).uid,
            )

    for revert in reverts:
        for changeset_id, (object_id, object_type) in sorted(attribute_by_deletion(revert, store).items()):
            if changeset_id in revert_ids or changeset_id in positives:
                continue
            positives[changeset_id] = LabeledExample(
                changeset_id=changeset_id,
                label=Label.VANDALISM,
                provenance=Provenance(
                    kind=ProvenanceKind.DELETION_ATTRIBUTION,
                    revert_id=revert.id,
                    object_id=object_id,
                    object_type=object_type,
                ),
                user_id=store.changeset(changeset_id).uid,
            )

    logger.info(
        f"Attributed {len(positives)} vandalism changesets",
        extra={"positives": len(positives), "reverts": len(reverts)},
    )
    return [positives[k] for k in sorted(positives)], revert_ids


def sample_negatives(
    store: ChangesetStore,
    exclude: Set[int],
    n: int,
    seed: int,
    mined: Optional[Tuple[List[LabeledExample], Set[int]]] = None,
) -> List[LabeledExample]:
    """
    n distinct Regular examples drawn uniformly from the store

    Vandalism reverts and attributed positives never enter the population,
    nor does anything in exclude. mined is the result of mine_positives
    when the caller already has it.
    """
    positives, revert_ids = mined if mined is not None else mine_positives(store)
    excluded = exclude | revert_ids | {p.changeset_id for p in positives}
    population = [cid for cid in store.ids() if cid not in excluded]
    if n > len(population):
        raise InsufficientPopulation(
            f"Cannot sample {n} negatives from a population of {len(population)}"
        )

    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(population), size=n, replace=False) if n else []
    negatives = [
        LabeledExample(
            changeset_id=population[i],
            label=Label.REGULAR,
            provenance=Provenance(kind=ProvenanceKind.NEGATIVE_SAMPLE),
            user_id=store.changeset(population[i]).uid,
        )
        for i in sorted(int(i) for i in chosen)
    ]
    return negatives


def mine_dataset(store: ChangesetStore, seed: int) -> List[LabeledExample]:
    """Balanced dataset: all attributed positives plus as many sampled negatives"""
    positives, revert_ids = mine_positives(store)
    negatives = sample_negatives(store, set(), len(positives), seed, mined=(positives, revert_ids))
    examples = sorted(positives + negatives, key=lambda e: e.changeset_id)
    logger.info(
        f"Mined {len(examples)} examples",
        extra={"positives": len(positives), "negatives": len(negatives), "seed": seed},
    )
    return examples


def split_user_disjoint(
    examples: Sequence[LabeledExample],
    ratios: Tuple[float, float, float] = (0.70, 0.10, 0.20),
    seed: int = 0,
) -> DatasetSplit:
    """
    Assign whole users to train/validation/test

    Users are shuffled by seed, then each goes to the split furthest below its
    target example count (ties resolved in train, validation, test order).
    """
    if len(ratios) != 3 or any(r < 0 for r in ratios) or abs(sum(ratios) - 1.0) > 1e-9:
        raise UsageError(f"Split ratios must be three non-negative numbers summing to 1, got {ratios}")

    by_user: Dict[int, List[LabeledExample]] = {}
    for example in examples:
        by_user.setdefault(example.user_id, []).append(example)

    users = sorted(by_user)
    rng = np.random.default_rng(seed)
    order = [users[i] for i in rng.permutation(len(users))]

    total = len(examples)
    targets = [r * total for r in ratios]
    counts = [0, 0, 0]
    parts: List[List[LabeledExample]] = [[], [], []]

    for user in order:
        deficits = [targets[i] - counts[i] for i in range(3)]
        best = max(range(3), key=lambda i: (deficits[i], -i))
        parts[best].extend(by_user[user])
        counts[best] += len(by_user[user])

    for part in parts:
        part.sort(key=lambda e: e.changeset_id)

    split = DatasetSplit(
        train=parts[0], validation=parts[1], test=parts[2], ratios=tuple(ratios), seed=seed
    )
    logger.info(
        "Split dataset user-disjointly",
        extra={name: len(split.part(name)) for name in SPLIT_NAMES},
    )
    return split


def convert_published(
    rows: Sequence[Tuple[int, Label, Optional[int]]],
    source: str,
    store: Optional[ChangesetStore] = None,
) -> List[LabeledExample]:
    """
    Published labels as Imported examples

    The author comes from the row, else from the store. Rows whose author is
    unknown either way are skipped with a warning; duplicate ids keep the first row.
    """
    examples: Dict[int, LabeledExample] = {}
    skipped = 0
    for changeset_id, label, user_id in rows:
        if changeset_id in examples:
            continue
        if user_id is None and store is not None and changeset_id in store:
            user_id = store.changeset(changeset_id).uid
        if user_id is None:
            skipped += 1
            logger.warning(
                f"Skipping published label for changeset {changeset_id} without a known author",
                extra={"changeset_id": changeset_id, "source": source},
            )
            continue
        examples[changeset_id] = LabeledExample(
            changeset_id=changeset_id,
            label=label,
            provenance=Provenance(kind=ProvenanceKind.IMPORTED, source=source),
            user_id=user_id,
        )

    logger.info(
        f"Converted {len(examples)} published labels",
        extra={"source": source, "skipped": skipped},
    )
    return [examples[k] for k in sorted(examples)]
