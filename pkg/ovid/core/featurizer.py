"""
Featurizer
Computes changeset (X_c), user (X_u) and edit (M_e) features from the store,
and fits/applies the z-score normalization.
"""

import fnmatch
import logging
from datetime import datetime, timezone
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from ovid.config import canonical_hash, config_loader, settings
from ovid.core.user_history import TOP12_KEYS, UserHistoryIndex
from ovid.errors import EmptyTrainingSet, MissingPreviousVersion, UsageError
from ovid.models.features import (
    D_EDIT,
    D_USER,
    EditFeatures,
    FeatureBundle,
    NormStats,
    changeset_feature_names,
)
from ovid.models.osm import Changeset, Edit, EditOp, ObjectType, bounding_box
from ovid.services.store import ChangesetStore

logger = logging.getLogger(__name__)

ACCOUNT_EPOCH = int(datetime(2004, 1, 1, tzinfo=timezone.utc).timestamp())
SECONDS_PER_DAY = 86400

OBJECT_TYPES = [ObjectType.NODE, ObjectType.WAY, ObjectType.RELATION]
EDIT_OPS = [EditOp.CREATE, EditOp.MODIFY, EditOp.DELETE]
TOP12_MODES = ("additions", "distinct")


class EditorVocabulary:
    """Maps created_by strings to one-hot slots by longest prefix"""

    def __init__(self, data: Dict[str, Any]):
        self.data = data
        self.slots: List[str] = [slot["name"] for slot in data["slots"]]
        self._prefixes: List[Tuple[str, int]] = sorted(
            (
                (prefix, index)
                for index, slot in enumerate(data["slots"])
                for prefix in slot.get("prefixes", [])
            ),
            key=lambda p: len(p[0]),
            reverse=True,
        )
        self.other = len(self.slots) - 1
        self.hash = canonical_hash(data)

    def __len__(self) -> int:
        return len(self.slots)

    def slot(self, created_by: Optional[str]) -> int:
        if created_by:
            for prefix, index in self._prefixes:
                if created_by.startswith(prefix):
                    return index
        return self.other

    def one_hot(self, created_by: Optional[str]) -> np.ndarray:
        vector = np.zeros(len(self.slots))
        vector[self.slot(created_by)] = 1.0
        return vector


class MapFeatures:
    """
    The map-features validity list

    Keys and values may be glob patterns; the value "*" accepts any value.
    """

    def __init__(self, rows: Iterable[Dict[str, Any]]):
        self._exact: Dict[str, List[str]] = {}
        self._patterns: List[Tuple[str, List[str]]] = []
        for row in rows:
            if any(ch in row["key"] for ch in "*?["):
                self._patterns.append((row["key"], row["values"]))
            else:
                self._exact[row["key"]] = row["values"]

    def is_valid(self, key: str, value: str) -> bool:
        values = self._exact.get(key)
        if values is None:
            for pattern, candidate in self._patterns:
                if fnmatch.fnmatchcase(key, pattern):
                    values = candidate
                    break
        if values is None:
            return False
        return any(v == "*" or fnmatch.fnmatchcase(value, v) for v in values)

    def count_valid(self, tags: Dict[str, str]) -> int:
        return sum(1 for k, v in tags.items() if self.is_valid(k, v))


class Featurizer:
    """
    Pure feature extraction over an immutable store

    - changeset_features: counts, extent, editor, imagery, comment length
    - user_features: author activity strictly before the changeset time
    - edit_features / edit_matrix: per-edit history and tag features
    """

    def __init__(
        self,
        store: ChangesetStore,
        vocabulary: Optional[EditorVocabulary] = None,
        map_features: Optional[MapFeatures] = None,
        top12_mode: Optional[str] = None,
        history: Optional[UserHistoryIndex] = None,
    ):
        self.store = store
        self.vocabulary = vocabulary or EditorVocabulary(config_loader.load_editor_vocabulary())
        self.map_features = map_features or MapFeatures(config_loader.load_map_features())
        self.top12_mode = top12_mode or settings.top12_mode
        if self.top12_mode not in TOP12_MODES:
            raise UsageError(f"top12 mode must be one of {TOP12_MODES}, got {self.top12_mode!r}")
        self.history = history or UserHistoryIndex(store, TOP12_KEYS)

    @property
    def changeset_names(self) -> List[str]:
        return changeset_feature_names(self.vocabulary.slots)

    @property
    def d_c(self) -> int:
        return len(self.changeset_names)

    def changeset_features(self, c: Changeset) -> np.ndarray:
        ops = [edit.op for edit in c.edits]
        n_creates = ops.count(EditOp.CREATE)
        n_modifications = ops.count(EditOp.MODIFY)
        n_deletes = ops.count(EditOp.DELETE)

        bbox = bounding_box(c)
        if bbox is None:
            geo = [0.0] * 5
        else:
            min_lat, min_lon, max_lat, max_lon = bbox
            size = (max_lat - min_lat) * (max_lon - min_lon)
            geo = [min_lat, max_lat, min_lon, max_lon, size]

        has_imagery = 1.0 if c.imagery_used and c.imagery_used.strip() else 0.0

        vector = np.concatenate(
            [
                [n_creates, n_modifications, n_deletes, len(ops)],
                geo,
                self.vocabulary.one_hot(c.created_by),
                [has_imagery, len(c.comment)],
            ]
        ).astype(np.float64)
        assert vector.shape == (self.d_c,)
        return vector

    def user_features(self, c: Changeset) -> np.ndarray:
        h = self.history.history(c.uid, c.t)
        top12 = h.top12_additions if self.top12_mode == "additions" else h.top12_distinct

        account_days = 0
        if h.account_created is not None:
            account_days = max(0, (h.account_created - ACCOUNT_EPOCH) // SECONDS_PER_DAY)

        vector = np.array(
            [
                h.past_creates,
                h.past_modifications,
                h.past_deletes,
                h.contributions,
                top12,
                account_days,
                h.active_weeks,
            ],
            dtype=np.float64,
        )
        assert vector.shape == (D_USER,)
        return vector

    def edit_features(self, e: Edit, strict: bool = False) -> EditFeatures:
        """
        Feature column of one edit

        Modify/Delete edits without an indexed previous version get zeros in the
        history-derived slots and are flagged; strict=True raises instead.
        """
        key = (e.object.id, e.object.type)
        type_hot = [float(e.object.type == t) for t in OBJECT_TYPES]
        op_hot = [float(e.op == op) for op in EDIT_OPS]

        after = {} if e.op == EditOp.DELETE else e.object.tags
        previous = None if e.op == EditOp.CREATE else self.store.previous_version(key, e.ver)
        missing = e.op != EditOp.CREATE and previous is None
        if missing and strict:
            raise MissingPreviousVersion(key, e.ver)

        if previous is not None:
            before = previous.tags
            authors = {v.uid for v in self.store.versions(key) if v.ver < e.ver and v.uid is not None}
            n_previous_authors = len(authors)
            time_to_previous = max(0, e.t - previous.t)
            n_added = sum(1 for k in after if k not in before)
            n_deleted = sum(1 for k in before if k not in after)
            n_previous_valid = self.map_features.count_valid(before)
            name_before, name_after = before.get("name"), after.get("name")
            name_changed = float(name_before != name_after)
        else:
            n_previous_authors = 0
            time_to_previous = 0
            n_added = len(after) if e.op == EditOp.CREATE else 0
            n_deleted = 0
            n_previous_valid = 0
            name_changed = 0.0

        values = np.array(
            type_hot
            + op_hot
            + [
                e.ver,
                n_previous_authors,
                time_to_previous,
                len(after),
                n_added,
                n_deleted,
                self.map_features.count_valid(after),
                n_previous_valid,
                name_changed,
            ],
            dtype=np.float64,
        )
        assert values.shape == (D_EDIT,)
        return EditFeatures(values=values, missing_history=missing)

    def edit_matrix(self, c: Changeset) -> Tuple[np.ndarray, bool]:
        """(d_e, |edits|) matrix in changeset order and whether any edit was flagged"""
        if not c.edits:
            return np.zeros((D_EDIT, 0)), False
        columns = [self.edit_features(edit) for edit in c.edits]
        matrix = np.stack([col.values for col in columns], axis=1)
        return matrix, any(col.missing_history for col in columns)

    def bundle(self, c: Changeset, label: Optional[int] = None, split: Optional[str] = None) -> FeatureBundle:
        m_e, flagged = self.edit_matrix(c)
        if flagged:
            logger.debug(
                f"Changeset {c.id} has edits without previous versions",
                extra={"changeset_id": c.id},
            )
        return FeatureBundle(
            changeset_id=c.id,
            user_id=c.uid,
            label=label,
            split=split,
            x_c=self.changeset_features(c),
            x_u=self.user_features(c),
            m_e=m_e,
            missing_history=flagged,
        )


def fit_norm(train_bundles: Sequence[FeatureBundle]) -> NormStats:
    """Per-dimension mean/std over the training split; edit columns are pooled"""
    if not train_bundles:
        raise EmptyTrainingSet("Cannot fit normalization on an empty training set")

    x_c = np.stack([b.x_c for b in train_bundles])
    x_u = np.stack([b.x_u for b in train_bundles])
    columns = [b.m_e for b in train_bundles if b.n_edits]
    if columns:
        edits = np.concatenate(columns, axis=1)
        e_mean, e_std = edits.mean(axis=1), edits.std(axis=1)
    else:
        e_mean, e_std = np.zeros(D_EDIT), np.zeros(D_EDIT)

    return NormStats(
        c_mean=x_c.mean(axis=0).tolist(),
        c_std=x_c.std(axis=0).tolist(),
        u_mean=x_u.mean(axis=0).tolist(),
        u_std=x_u.std(axis=0).tolist(),
        e_mean=e_mean.tolist(),
        e_std=e_std.tolist(),
    )


def _zscore(x: np.ndarray, mean: List[float], std: List[float]) -> np.ndarray:
    mean, std = np.asarray(mean), np.asarray(std)
    safe = np.where(std > 0, std, 1.0)
    return (x - mean) / safe


def apply_norm(bundle: FeatureBundle, stats: NormStats) -> FeatureBundle:
    """z-score every dimension; zero-variance dimensions are only centered"""
    return bundle.model_copy(
        update={
            "x_c": _zscore(bundle.x_c, stats.c_mean, stats.c_std),
            "x_u": _zscore(bundle.x_u, stats.u_mean, stats.u_std),
            "m_e": _zscore(bundle.m_e.T, stats.e_mean, stats.e_std).T
            if bundle.n_edits
            else bundle.m_e,
        }
    )


def _unzscore(z: np.ndarray, mean: List[float], std: List[float]) -> np.ndarray:
    mean, std = np.asarray(mean), np.asarray(std)
    return z * np.where(std > 0, std, 1.0) + mean


def denormalize(bundle: FeatureBundle, stats: NormStats) -> FeatureBundle:
    """Inverse of apply_norm"""
    return bundle.model_copy(
        update={
            "x_c": _unzscore(bundle.x_c, stats.c_mean, stats.c_std),
            "x_u": _unzscore(bundle.x_u, stats.u_mean, stats.u_std),
            "m_e": _unzscore(bundle.m_e.T, stats.e_mean, stats.e_std).T
            if bundle.n_edits
            else bundle.m_e,
        }
    )
