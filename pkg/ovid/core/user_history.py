"""
User History Index
Per-user cumulative activity counters queried at a point in time
"""

import logging
from collections import defaultdict
from typing import Dict, FrozenSet, List, Tuple

import numpy as np

from ovid.models.osm import EditOp, UserHistory, iso_week
from ovid.services.store import ChangesetStore

logger = logging.getLogger(__name__)

TOP12_KEYS: FrozenSet[str] = frozenset(
    {
        "building",
        "source",
        "highway",
        "name",
        "natural",
        "surface",
        "landuse",
        "power",
        "waterway",
        "amenity",
        "service",
        "oneway",
    }
)


class _UserTimeline:
    """Prefix sums over one user's time-ordered activity"""

    def __init__(self, edit_rows: List[Tuple], changeset_rows: List[Tuple[int, Tuple[int, int]]]):
        edit_rows.sort(key=lambda r: r[0])
        changeset_rows.sort(key=lambda r: r[0])

        self.edit_times = np.array([r[0] for r in edit_rows], dtype=np.int64)
        ops = [r[1] for r in edit_rows]
        self.creates = np.cumsum([op == EditOp.CREATE for op in ops], dtype=np.int64)
        self.modifications = np.cumsum([op == EditOp.MODIFY for op in ops], dtype=np.int64)
        self.deletes = np.cumsum([op == EditOp.DELETE for op in ops], dtype=np.int64)
        self.top12_additions = np.cumsum([len(r[3]) for r in edit_rows], dtype=np.int64)

        seen_objects, seen_keys = set(), set()
        objects, keys = [], []
        for _, _, key, added in edit_rows:
            seen_objects.add(key)
            seen_keys.update(added)
            objects.append(len(seen_objects))
            keys.append(len(seen_keys))
        self.objects = np.array(objects, dtype=np.int64)
        self.top12_distinct = np.array(keys, dtype=np.int64)

        self.changeset_times = np.array([r[0] for r in changeset_rows], dtype=np.int64)
        seen_weeks = set()
        weeks = []
        for _, week in changeset_rows:
            seen_weeks.add(week)
            weeks.append(len(seen_weeks))
        self.weeks = np.array(weeks, dtype=np.int64)

    @staticmethod
    def _at(cumulative: np.ndarray, n: int) -> int:
        return int(cumulative[n - 1]) if n > 0 else 0

    def snapshot(self, uid: int, t: int, account_created) -> UserHistory:
        n = int(np.searchsorted(self.edit_times, t, side="left"))
        m = int(np.searchsorted(self.changeset_times, t, side="left"))
        return UserHistory(
            uid=uid,
            at=t,
            past_creates=self._at(self.creates, n),
            past_modifications=self._at(self.modifications, n),
            past_deletes=self._at(self.deletes, n),
            contributions=self._at(self.objects, n),
            top12_additions=self._at(self.top12_additions, n),
            top12_distinct=self._at(self.top12_distinct, n),
            account_created=account_created,
            active_weeks=self._at(self.weeks, m),
        )


class UserHistoryIndex:
    """
    Answers "what had this user done strictly before time t"

    - Built once over the immutable store
    - Edits count by edit timestamp, active weeks by changeset timestamp
    - Top-12 key additions compare each edit with the previous indexed version
    """

    def __init__(self, store: ChangesetStore, top12_keys: FrozenSet[str] = TOP12_KEYS):
        self.store = store
        self.top12_keys = top12_keys
        self._timelines: Dict[int, _UserTimeline] = {}
        self._build()

    def _build(self) -> None:
        edit_rows: Dict[int, List[Tuple]] = defaultdict(list)
        changeset_rows: Dict[int, List[Tuple]] = defaultdict(list)

        for changeset in self.store.changesets():
            changeset_rows[changeset.uid].append((changeset.t, iso_week(changeset.t)))
            for edit in changeset.edits:
                uid = edit.uid if edit.uid is not None else changeset.uid
                edit_rows[uid].append(self._edit_row(edit))

        for edit in self.store.parked:
            if edit.uid is not None:
                edit_rows[edit.uid].append(self._edit_row(edit))

        for uid in set(edit_rows) | set(changeset_rows):
            self._timelines[uid] = _UserTimeline(edit_rows[uid], changeset_rows[uid])

        logger.info(
            f"Built user history for {len(self._timelines)} users",
            extra={"users": len(self._timelines)},
        )

    def _edit_row(self, edit) -> Tuple:
        key = (edit.object.id, edit.object.type)
        return (edit.t, edit.op, key, self.top12_added(edit))

    def top12_added(self, edit) -> FrozenSet[str]:
        """Top-12 keys present after the edit and absent before it"""
        if edit.op == EditOp.DELETE:
            return frozenset()
        key = (edit.object.id, edit.object.type)
        previous = self.store.previous_version(key, edit.ver)
        before = set(previous.tags) if previous is not None else set()
        return frozenset(k for k in edit.object.tags if k in self.top12_keys and k not in before)

    def history(self, uid: int, t: int) -> UserHistory:
        """Counters over activity strictly before t"""
        timeline = self._timelines.get(uid)
        created = self.store.account_created(uid)
        if timeline is None:
            return UserHistory(uid=uid, at=t, account_created=created)
        return timeline.snapshot(uid, t, created)
