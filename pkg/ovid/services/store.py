"""
Changeset store
Append-only changeset collection with a per-object version-history index,
persisted as JSON lines with a schema header.
"""

import bisect
import logging
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, ValidationError

from ovid.errors import DataError, EditOutsideWindow, StoreIoError
from ovid.models.osm import Changeset, Edit, EditOp, ObjectKey, ObjectType, Point
from ovid.services.jsonl import JsonlReader, write_jsonl

logger = logging.getLogger(__name__)

STORE_SCHEMA = "ovid-store"
STORE_VERSION = 1


class VersionEntry(BaseModel):
    """One indexed version of an object"""

    model_config = ConfigDict(frozen=True)

    changeset_id: int
    uid: Optional[int]
    ver: int
    t: int
    op: EditOp
    tags: Dict[str, str]
    name: Optional[str] = None
    loc: Tuple[Point, ...] = ()


class ChangesetStore:
    """
    Holds changesets keyed by id and the version history of every edited object

    - Changeset metadata is added first; edits are attached afterwards
    - Edits referencing unknown changesets are parked, not dropped
    - Version history per (id, type) is kept sorted by version
    """

    def __init__(self):
        self._changesets: Dict[int, Changeset] = {}
        self._edits: Dict[int, List[Edit]] = {}
        self._parked: List[Edit] = []
        self._versions: Dict[ObjectKey, List[VersionEntry]] = {}
        self._accounts: Dict[int, int] = {}
        self._cache: Dict[int, Changeset] = {}

    def __len__(self) -> int:
        return len(self._changesets)

    def __contains__(self, changeset_id: int) -> bool:
        return changeset_id in self._changesets

    def add_changeset(self, changeset: Changeset) -> None:
        """Add changeset metadata; ids must be unique"""
        if changeset.id in self._changesets:
            raise DataError(f"Duplicate changeset id {changeset.id}")

        self._changesets[changeset.id] = changeset.model_copy(update={"edits": ()})
        self._edits[changeset.id] = list(changeset.edits)
        for edit in changeset.edits:
            self._index(edit)

    def add_edit(self, edit: Edit) -> bool:
        """
        Attach an edit to its changeset and index it

        Returns:
            False when the changeset is unknown and the edit was parked

        Raises:
            EditOutsideWindow: the edit time falls outside its changeset's open/close window
        """
        changeset = self._changesets.get(edit.changeset_id)
        if changeset is not None and not changeset.in_window(edit.t):
            raise EditOutsideWindow(edit.changeset_id, edit.t, (changeset.t, changeset.closed_at))

        self._index(edit)
        if changeset is None:
            self._parked.append(edit)
            return False

        self._edits[edit.changeset_id].append(edit)
        self._cache.pop(edit.changeset_id, None)
        return True

    def _index(self, edit: Edit) -> None:
        key = (edit.object.id, edit.object.type)
        uid = edit.uid
        if uid is None and edit.changeset_id in self._changesets:
            uid = self._changesets[edit.changeset_id].uid

        if edit.op == EditOp.DELETE:
            tags, loc = {}, ()
        else:
            tags, loc = dict(edit.object.tags), edit.object.loc

        entry = VersionEntry(
            changeset_id=edit.changeset_id,
            uid=uid,
            ver=edit.ver,
            t=edit.t,
            op=edit.op,
            tags=tags,
            name=tags.get("name"),
            loc=loc,
        )
        history = self._versions.setdefault(key, [])
        bisect.insort_right(history, entry, key=lambda e: e.ver)

    def set_account_created(self, uid: int, t: int) -> None:
        self._accounts[uid] = t

    def account_created(self, uid: int) -> Optional[int]:
        return self._accounts.get(uid)

    def accounts(self) -> Dict[int, int]:
        return dict(self._accounts)

    def changeset(self, changeset_id: int) -> Optional[Changeset]:
        """Changeset with its edits attached, in ingest order"""
        if changeset_id not in self._changesets:
            return None
        cached = self._cache.get(changeset_id)
        if cached is None:
            cached = self._changesets[changeset_id].model_copy(
                update={"edits": tuple(self._edits[changeset_id])}
            )
            self._cache[changeset_id] = cached
        return cached

    def ids(self) -> List[int]:
        return sorted(self._changesets)

    def changesets(self) -> Iterator[Changeset]:
        """All changesets ordered by id"""
        for changeset_id in self.ids():
            yield self.changeset(changeset_id)

    @property
    def parked(self) -> List[Edit]:
        return list(self._parked)

    def versions(self, key: ObjectKey) -> List[VersionEntry]:
        return list(self._versions.get(key, ()))

    def object_keys(self) -> List[ObjectKey]:
        return list(self._versions)

    def previous_version(self, key: ObjectKey, ver: int) -> Optional[VersionEntry]:
        """Latest indexed version strictly below ver"""
        history = self._versions.get(key)
        if not history:
            return None
        pos = bisect.bisect_left(history, ver, key=lambda e: e.ver)
        return history[pos - 1] if pos > 0 else None

    def node_position(self, node_id: int) -> Optional[Point]:
        """Latest known coordinate of a node"""
        for entry in reversed(self._versions.get((node_id, ObjectType.NODE), ())):
            if entry.loc:
                return entry.loc[0]
        return None


def _store_records(store: ChangesetStore) -> Iterator[dict]:
    for uid, created in sorted(store.accounts().items()):
        yield {"kind": "user", "uid": uid, "account_created": created}
    for changeset in store.changesets():
        yield {"kind": "changeset", **changeset.model_dump(mode="json")}
    for edit in store.parked:
        yield {"kind": "parked", "edit": edit.model_dump(mode="json")}


def save_store(store: ChangesetStore, path: str | Path) -> None:
    """Write the store as header + user/changeset/parked records + end record"""
    count = write_jsonl(
        path, {"schema": STORE_SCHEMA, "version": STORE_VERSION}, _store_records(store)
    )
    logger.info(
        f"Saved store with {len(store)} changesets",
        extra={"path": str(path), "records": count, "parked": len(store.parked)},
    )


def load_store(path: str | Path) -> ChangesetStore:
    """Read a store written by save_store"""
    store = ChangesetStore()
    for index, offset, record in JsonlReader(path, STORE_SCHEMA, STORE_VERSION):
        kind = record.pop("kind", None)
        try:
            if kind == "user":
                store.set_account_created(record["uid"], record["account_created"])
            elif kind == "changeset":
                store.add_changeset(Changeset.model_validate(record))
            elif kind == "parked":
                store.add_edit(Edit.model_validate(record["edit"]))
            else:
                raise StoreIoError(f"{path}: unknown record kind {kind!r}", index, offset)
        except (ValidationError, KeyError) as e:
            raise StoreIoError(f"{path}: invalid record: {e}", index, offset) from e

    logger.info(f"Loaded store with {len(store)} changesets", extra={"path": str(path)})
    return store
