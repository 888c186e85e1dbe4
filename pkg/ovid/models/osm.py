"""
OSM domain model: objects, edits, changesets and per-user history snapshots
"""

from datetime import datetime, timezone
from enum import Enum
from typing import Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator

Point = Tuple[float, float]  # (lat, lon) in WGS84 degrees
BBox = Tuple[float, float, float, float]  # (min_lat, min_lon, max_lat, max_lon)
ObjectKey = Tuple[int, "ObjectType"]


class ObjectType(str, Enum):
    """OSM element types"""

    NODE = "node"
    WAY = "way"
    RELATION = "relation"


class EditOp(str, Enum):
    """osmChange block an element appeared in"""

    CREATE = "create"
    MODIFY = "modify"
    DELETE = "delete"


class OsmObject(BaseModel):
    """
    One version of an OSM element

    loc holds a single point for nodes, the resolved node coordinates of a way,
    and the resolved node members of a relation. Relation topology is not modeled.
    """

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    type: ObjectType
    loc: Tuple[Point, ...] = ()
    tags: Dict[str, str] = Field(default_factory=dict)
    ver: int = Field(ge=1)

    @model_validator(mode="after")
    def _check_node_location(self):
        if self.type == ObjectType.NODE:
            if len(self.loc) > 1:
                raise ValueError(f"node {self.id} has {len(self.loc)} points")
            for lat, lon in self.loc:
                if not -90.0 <= lat <= 90.0 or not -180.0 <= lon <= 180.0:
                    raise ValueError(f"node {self.id} outside WGS84 range: {lat}, {lon}")
        return self


class Edit(BaseModel):
    """
    A create/modify/delete of one object

    object is the state after the edit for create/modify and the state before
    it for delete (the previous version is joined in at ingest).
    """

    model_config = ConfigDict(frozen=True)

    object: OsmObject
    op: EditOp
    ver: int = Field(ge=1)
    t: int  # UTC seconds
    changeset_id: int = Field(ge=0)
    uid: Optional[int] = None

    @model_validator(mode="after")
    def _check_version(self):
        if self.op == EditOp.CREATE and self.ver != 1:
            raise ValueError(f"create of {self.object.type.value} {self.object.id} has version {self.ver}")
        if self.op != EditOp.CREATE and self.ver < 2:
            raise ValueError(
                f"{self.op.value} of {self.object.type.value} {self.object.id} has version {self.ver}"
            )
        return self


class Changeset(BaseModel):
    """A bundle of edits committed by one user, with its metadata tags"""

    model_config = ConfigDict(frozen=True)

    id: int = Field(ge=0)
    edits: Tuple[Edit, ...] = ()
    t: int  # created_at, UTC seconds
    closed_at: Optional[int] = None
    uid: int = Field(ge=0)
    username: str = ""
    comment: str = ""
    created_by: Optional[str] = None
    imagery_used: Optional[str] = None
    bbox: Optional[BBox] = None

    def in_window(self, t: int) -> bool:
        """t within [created_at, closed_at]; anything goes while closed_at is unknown"""
        return self.closed_at is None or self.t <= t <= self.closed_at

    @model_validator(mode="after")
    def _check_edit_times(self):
        for edit in self.edits:
            if not self.in_window(edit.t):
                raise ValueError(
                    f"edit of {edit.object.type.value} {edit.object.id} at {edit.t} "
                    f"outside changeset {self.id} window [{self.t}, {self.closed_at}]"
                )
        return self


class UserHistory(BaseModel):
    """Activity of one user strictly before a query timestamp"""

    model_config = ConfigDict(frozen=True)

    uid: int
    at: int
    past_creates: int = 0
    past_modifications: int = 0
    past_deletes: int = 0
    contributions: int = 0
    top12_additions: int = 0
    top12_distinct: int = 0
    account_created: Optional[int] = None
    active_weeks: int = 0


def object_identity(o: OsmObject) -> ObjectKey:
    """Composite identity of an object: ids are only unique per type"""
    return (o.id, o.type)


def bounding_box(c: Changeset) -> Optional[BBox]:
    """Declared bbox if present, else the envelope over all edit coordinates"""
    if c.bbox is not None:
        return c.bbox

    points = [p for edit in c.edits for p in edit.object.loc]
    if not points:
        return None

    lats = [lat for lat, _ in points]
    lons = [lon for _, lon in points]
    return (min(lats), min(lons), max(lats), max(lons))


def parse_timestamp(value: str) -> int:
    """ISO-8601 'YYYY-MM-DDTHH:MM:SSZ' to integer UTC seconds"""
    if value.endswith("Z"):
        value = value[:-1] + "+00:00"
    dt = datetime.fromisoformat(value)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def iso_week(t: int) -> Tuple[int, int]:
    """ISO (year, week) of a UTC timestamp"""
    year, week, _ = datetime.fromtimestamp(t, tz=timezone.utc).isocalendar()
    return (year, week)
