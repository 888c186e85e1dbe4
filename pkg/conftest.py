"""
Shared pytest fixtures

HistoryBuilder writes changeset-dump, osmChange and user XML for a synthetic
edit history; build_fixture_history() produces the 200-changeset history with
known vandalism labels used across the test modules.
"""

from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
import pytest
from lxml import etree

from ovid.models.features import D_EDIT, D_USER, FeatureBundle
from ovid.services.history_parser import ingest
from ovid.services.store import ChangesetStore

T0 = int(datetime(2018, 1, 1, tzinfo=timezone.utc).timestamp())
EDITORS = ["JOSM/1.5 (18303 en)", "iD 2.20.2", "Potlatch 2", "Vespucci 15.0"]


def iso(t: int) -> str:
    return datetime.fromtimestamp(t, tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


class HistoryBuilder:
    """Accumulates changesets and edits in chronological order"""

    def __init__(self, start: int = T0):
        self.clock = start
        self.changesets: List[dict] = []
        self.changes: List[Tuple[str, etree._Element]] = []
        self.current: Dict[Tuple[str, int], dict] = {}
        self.accounts: Dict[int, int] = {}

    @property
    def next_id(self) -> int:
        return len(self.changesets) + 1

    def changeset(
        self,
        uid: int,
        comment: str = "",
        created_by: Optional[str] = EDITORS[0],
        imagery: Optional[str] = None,
    ) -> int:
        cs = {
            "id": self.next_id,
            "uid": uid,
            "t": self.clock,
            "comment": comment,
            "created_by": created_by,
            "imagery": imagery,
        }
        self.changesets.append(cs)
        self.accounts.setdefault(uid, self.clock - 400 * 86400)
        self.clock += 3600
        return cs["id"]

    def _uid(self, cs: int) -> int:
        return self.changesets[cs - 1]["uid"]

    def _element(self, kind: str, object_id: int, cs: int, state: dict) -> etree._Element:
        elem = etree.Element(
            kind,
            id=str(object_id),
            version=str(state["ver"]),
            changeset=str(cs),
            timestamp=iso(self.changesets[cs - 1]["t"] + 60),
            uid=str(self._uid(cs)),
            user=f"user{self._uid(cs)}",
        )
        if kind == "node" and "lat" in state:
            elem.set("lat", repr(state["lat"]))
            elem.set("lon", repr(state["lon"]))
        for ref in state.get("refs", ()):
            etree.SubElement(elem, "nd", ref=str(ref))
        for k, v in sorted(state["tags"].items()):
            etree.SubElement(elem, "tag", k=k, v=v)
        return elem

    def create_node(self, cs: int, node_id: int, tags: dict, lat: float = 48.1, lon: float = 11.5) -> None:
        state = {"ver": 1, "tags": dict(tags), "lat": lat, "lon": lon}
        self.current[("node", node_id)] = state
        self.changes.append(("create", self._element("node", node_id, cs, state)))

    def create_way(self, cs: int, way_id: int, refs: List[int], tags: dict) -> None:
        state = {"ver": 1, "tags": dict(tags), "refs": list(refs)}
        self.current[("way", way_id)] = state
        self.changes.append(("create", self._element("way", way_id, cs, state)))

    def modify(self, cs: int, kind: str, object_id: int, updates: dict, remove=()) -> None:
        state = dict(self.current[(kind, object_id)])
        tags = {**state["tags"], **updates}
        for key in remove:
            tags.pop(key, None)
        state.update(ver=state["ver"] + 1, tags=tags)
        self.current[(kind, object_id)] = state
        self.changes.append(("modify", self._element(kind, object_id, cs, state)))

    def delete(self, cs: int, kind: str, object_id: int) -> None:
        state = self.current.pop((kind, object_id))
        gone = {"ver": state["ver"] + 1, "tags": {}}
        self.changes.append(("delete", self._element(kind, object_id, cs, gone)))

    def changeset_xml(self) -> bytes:
        root = etree.Element("osm", version="0.6")
        for cs in self.changesets:
            elem = etree.SubElement(
                root,
                "changeset",
                id=str(cs["id"]),
                created_at=iso(cs["t"]),
                closed_at=iso(cs["t"] + 1800),
                open="false",
                user=f"user{cs['uid']}",
                uid=str(cs["uid"]),
            )
            for key, value in (
                ("comment", cs["comment"]),
                ("created_by", cs["created_by"]),
                ("imagery_used", cs["imagery"]),
            ):
                if value:
                    etree.SubElement(elem, "tag", k=key, v=value)
        return etree.tostring(root, xml_declaration=True, encoding="UTF-8")

    def osc_xml(self, start: int = 0, stop: Optional[int] = None) -> bytes:
        root = etree.Element("osmChange", version="0.6")
        for op, elem in self.changes[start:stop]:
            block = etree.SubElement(root, op)
            block.append(etree.fromstring(etree.tostring(elem)))
        return etree.tostring(root, xml_declaration=True, encoding="UTF-8")

    def users_xml(self) -> bytes:
        root = etree.Element("osm", version="0.6")
        for uid, created in sorted(self.accounts.items()):
            etree.SubElement(root, "user", id=str(uid), display_name=f"user{uid}", account_created=iso(created))
        return etree.tostring(root, xml_declaration=True, encoding="UTF-8")

    def store(self) -> ChangesetStore:
        store = ChangesetStore()
        ingest(store, self.changeset_xml(), [self.osc_xml()], self.users_xml())
        return store


class FixtureHistory:
    def __init__(self, builder: HistoryBuilder):
        self.builder = builder
        self.explicit: List[int] = []
        self.deletion: List[int] = []
        self.multi_author: List[int] = []
        self.reverts: List[int] = []
        self.reverter_own: Optional[int] = None
        self.typo_fix: Optional[int] = None

    @property
    def positives(self) -> set:
        return set(self.explicit) | set(self.deletion)


def build_fixture_history(total: int = 200) -> FixtureHistory:
    """
    200 changesets: regular cafe mapping, 10 renames reverted by comments that
    name them, 10 fake shops reverted by deletion, and decoys (multi-author
    deletions, self-mentions, unknown ids, a non-vandalism revert)
    """
    b = HistoryBuilder()
    fx = FixtureHistory(b)

    for i in range(1, 101):
        cs = b.changeset(
            (i - 1) % 20 + 1,
            comment=f"Add cafe {i}",
            created_by=EDITORS[i % 4],
            imagery="Bing aerial imagery" if i % 3 == 0 else None,
        )
        b.create_node(cs, 1000 + i, {"amenity": "cafe", "name": f"Cafe {i}"}, 48.0 + i * 0.001, 11.0 + i * 0.001)
        if i > 50:
            b.modify(cs, "node", 1000 + i - 50, {"opening_hours": "Mo-Fr 08:00-18:00"})

    cs = b.changeset(3, comment="Add footway")
    b.create_way(cs, 7001, [1001, 1002, 1003], {"highway": "footway", "surface": "asphalt"})

    fx.reverter_own = b.changeset(901, comment="Add bench")
    b.create_node(fx.reverter_own, 6001, {"amenity": "bench"}, 48.2, 11.2)

    for k in range(1, 11):
        cs = b.changeset(100 + k, comment="update", created_by="iD 2.20.2")
        b.modify(cs, "node", 1000 + k, {"name": "VANDAL WAS HERE"}, remove=("opening_hours",))
        fx.explicit.append(cs)

    for k in range(1, 11):
        cs = b.changeset(110 + k, comment="new shop", created_by="Go Map!! 3.1")
        b.create_node(cs, 5000 + k, {"shop": "fake", "name": f"Fake {k}"}, 48.3 + k * 0.001, 11.3)
        fx.deletion.append(cs)

    for k in range(1, 6):
        cs = b.changeset(130 + k, comment="fix name")
        b.modify(cs, "node", 1060 + k, {"name": f"Cafe {60 + k} (closed)"})
        fx.multi_author.append(cs)

    e = fx.explicit
    comments = [
        (f"Revert vandalism in changeset {e[0]}", [0]),
        (f"vandalism fix: changesets {e[1]} and {e[2]}", [1, 2]),
        (f"Undo Vandalism, see changeset #{e[3]}", [3]),
        (f"Reverted vandalism (https://www.openstreetmap.org/changeset/{e[4]})", [4]),
        (f"VANDALISM: reverting changesets {e[5]},{e[6]}, {e[7]}", [5, 6, 7]),
        (f"revert vandalism changeset: {e[8]}", [8]),
        (f"Revert vandalism of changeset {e[9]} and changeset 99999", [9]),
    ]
    for comment, targets in comments:
        cs = b.changeset(900, comment=comment)
        for index in targets:
            b.modify(cs, "node", 1001 + index, {"name": f"Cafe {1 + index}"})
        fx.reverts.append(cs)

    own = b.next_id
    cs = b.changeset(901, comment=f"Revert vandalism, see changesets {fx.reverter_own} and {own}")
    b.modify(cs, "node", 1020, {"name": "Cafe 20"})
    fx.reverts.append(cs)

    for group in (range(1, 6), range(6, 11)):
        cs = b.changeset(901, comment="Removing vandalism")
        for k in group:
            b.delete(cs, "node", 5000 + k)
        fx.reverts.append(cs)

    cs = b.changeset(901, comment="vandalism cleanup")
    for k in range(1, 6):
        b.delete(cs, "node", 1060 + k)
    b.delete(cs, "node", 6001)
    fx.reverts.append(cs)

    fx.typo_fix = b.changeset(900, comment="fix typo")
    b.modify(fx.typo_fix, "node", 1090, {"name": "Cafe Ninety"})

    i = 0
    while len(b.changesets) < total:
        i += 1
        cs = b.changeset((i - 1) % 20 + 1, comment=f"Cuisine survey {i}", created_by=EDITORS[i % 4])
        b.modify(cs, "node", 1066 + (i % 35), {"cuisine": "coffee_shop", "survey:date": "2018"})

    return fx


@pytest.fixture(scope="session")
def fixture_history() -> FixtureHistory:
    return build_fixture_history()


@pytest.fixture
def fixture_store(fixture_history) -> ChangesetStore:
    return fixture_history.builder.store()


@pytest.fixture
def fixture_files(fixture_history, tmp_path) -> Dict[str, Path]:
    """The fixture history written as XML files, osmChange split in two"""
    b = fixture_history.builder
    half = len(b.changes) // 2
    files = {
        "changesets": tmp_path / "changesets.osm",
        "osc_a": tmp_path / "a.osc",
        "osc_b": tmp_path / "b.osc",
        "users": tmp_path / "users.xml",
    }
    files["changesets"].write_bytes(b.changeset_xml())
    files["osc_a"].write_bytes(b.osc_xml(0, half))
    files["osc_b"].write_bytes(b.osc_xml(half))
    files["users"].write_bytes(b.users_xml())
    return files


def make_bundle(
    changeset_id: int = 1,
    label: Optional[int] = None,
    x_c=None,
    x_u=None,
    m_e=None,
    d_c: int = 20,
    n_edits: int = 3,
    seed: int = 0,
    user_id: Optional[int] = None,
    split: Optional[str] = None,
) -> FeatureBundle:
    """Random normalized-looking bundle; any block can be given explicitly"""
    rng = np.random.default_rng(seed)
    return FeatureBundle(
        changeset_id=changeset_id,
        user_id=user_id if user_id is not None else changeset_id,
        label=label,
        split=split,
        x_c=x_c if x_c is not None else rng.normal(size=d_c),
        x_u=x_u if x_u is not None else rng.normal(size=D_USER),
        m_e=m_e if m_e is not None else rng.normal(size=(D_EDIT, n_edits)),
    )


def separable_set(n: int = 64, d_c: int = 20, seed: int = 0, flip: bool = False) -> List[FeatureBundle]:
    """Labels determined by the sign of the first user feature"""
    rng = np.random.default_rng(seed)
    bundles = []
    for i in range(n):
        label = i % 2
        x_u = rng.normal(size=D_USER) * 0.3
        x_u[0] = (1.5 if label else -1.5) + rng.normal() * 0.2
        bundles.append(
            make_bundle(
                changeset_id=i + 1,
                label=(1 - label) if flip else label,
                x_u=x_u,
                d_c=d_c,
                n_edits=1 + i % 4,
                seed=seed * 1000 + i,
            )
        )
    return bundles
