"""
OSM history parsers

Streams the changesets-dump XML, osmChange XML and user XML into domain
types. Input may be a path, a binary stream or raw bytes; gzip input is
detected by its magic bytes and decompressed on the fly.
"""

import io
import logging
import zlib
from pathlib import Path
from typing import BinaryIO, Dict, Iterable, Iterator, List, Optional, Tuple, Union

from lxml import etree
from pydantic import ValidationError

from ovid.errors import MalformedXml, UnknownChangeset
from ovid.models.osm import (
    Changeset,
    Edit,
    EditOp,
    ObjectType,
    OsmObject,
    Point,
    parse_timestamp,
)
from ovid.services.store import ChangesetStore

logger = logging.getLogger(__name__)

XmlSource = Union[str, Path, bytes, BinaryIO]

GZIP_MAGIC = b"\x1f\x8b"
CHUNK_SIZE = 64 * 1024


def _raw_chunks(source: XmlSource) -> Iterator[bytes]:
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    if isinstance(source, (str, Path)):
        with open(source, "rb") as f:
            yield from _raw_chunks(f)
        return

    while True:
        data = source.read(CHUNK_SIZE)
        if not data:
            break
        yield data


def iter_chunks(source: XmlSource) -> Iterator[bytes]:
    """Byte chunks of the source, gunzipped when it starts with the gzip magic"""
    chunks = _raw_chunks(source)
    first = next(chunks, b"")
    if not first.startswith(GZIP_MAGIC):
        if first:
            yield first
        yield from chunks
        return

    decompressor = zlib.decompressobj(wbits=31)
    for data in _chain([first], chunks):
        while data:
            out = decompressor.decompress(data)
            if out:
                yield out
            data = decompressor.unused_data
            if data:
                # concatenated gzip members
                decompressor = zlib.decompressobj(wbits=31)
    tail = decompressor.flush()
    if tail:
        yield tail


def _chain(first: List[bytes], rest: Iterator[bytes]) -> Iterator[bytes]:
    yield from first
    yield from rest


def iter_elements(
    source: XmlSource, interesting_tags: Iterable[str], events=("end",)
) -> Iterator[Tuple[str, etree._Element]]:
    """
    Parse a (possibly large) XML source, yielding (event, element) for listed tags

    Elements are removed from the tree after their end event has been handled;
    do not mark nested tags as interesting.
    """
    interesting = set(interesting_tags)
    parser = etree.XMLPullParser(events=events, no_network=True, resolve_entities=False)
    try:
        for data in iter_chunks(source):
            parser.feed(data)
            yield from _drain(parser, interesting)
        parser.close()
        yield from _drain(parser, interesting)
    except etree.XMLSyntaxError as e:
        line, column = e.position if e.position else (None, None)
        raise MalformedXml(e.msg or str(e), line, column) from e


def _drain(parser, interesting) -> Iterator[Tuple[str, etree._Element]]:
    for event, elem in parser.read_events():
        if elem.tag in interesting:
            yield event, elem
            if event == "end":
                cleanup(elem)


def cleanup(element) -> None:
    """Deletes element and its preceding siblings from the tree"""
    element.clear()
    while element.getprevious() is not None:
        del element.getparent()[0]


def _tags(elem) -> Dict[str, str]:
    return {child.get("k"): child.get("v", "") for child in elem if child.tag == "tag"}


class ChangesetDumpReader:
    """
    Reads changeset metadata from the changesets-dump dialect

    Changesets without id, uid or created_at are skipped and counted.
    """

    def __init__(self, source: XmlSource):
        self.source = source
        self.parsed = 0
        self.skipped = 0

    def __iter__(self) -> Iterator[Changeset]:
        for _, elem in iter_elements(self.source, ["changeset"]):
            changeset = self._to_changeset(elem)
            if changeset is None:
                self.skipped += 1
                continue
            self.parsed += 1
            yield changeset

        logger.info(
            f"Parsed {self.parsed} changesets, skipped {self.skipped}",
            extra={"parsed": self.parsed, "skipped": self.skipped},
        )

    def _to_changeset(self, elem) -> Optional[Changeset]:
        attrs = elem.attrib
        missing = [a for a in ("id", "uid", "created_at") if not attrs.get(a)]
        if missing:
            logger.warning(
                f"Skipping changeset {attrs.get('id', '?')}: missing {', '.join(missing)}",
                extra={"changeset_id": attrs.get("id"), "line": elem.sourceline},
            )
            return None

        tags = _tags(elem)
        bbox = None
        corners = [attrs.get(k) for k in ("min_lat", "min_lon", "max_lat", "max_lon")]

        try:
            if all(c is not None for c in corners):
                bbox = tuple(float(c) for c in corners)
            return Changeset(
                id=int(attrs["id"]),
                t=parse_timestamp(attrs["created_at"]),
                closed_at=parse_timestamp(attrs["closed_at"]) if attrs.get("closed_at") else None,
                uid=int(attrs["uid"]),
                username=attrs.get("user", ""),
                comment=tags.get("comment", ""),
                created_by=tags.get("created_by"),
                imagery_used=tags.get("imagery_used"),
                bbox=bbox,
            )
        except (ValueError, ValidationError) as e:
            logger.warning(
                f"Skipping changeset {attrs.get('id')}: {e}",
                extra={"changeset_id": attrs.get("id"), "line": elem.sourceline},
            )
            return None


class OscReader:
    """
    Reads osmChange edits and attaches them to the changesets of a store

    Delete edits are joined with the previous indexed version so the edit
    carries the pre-deletion tags and geometry. Edits whose changeset is not
    in the store are parked there and recorded in `unknown`.
    """

    ELEMENTS = ("node", "way", "relation")
    BLOCKS = ("create", "modify", "delete")

    def __init__(self, source: XmlSource, store: ChangesetStore):
        self.source = source
        self.store = store
        self.edits = 0
        self.unknown: List[UnknownChangeset] = []

    def __iter__(self) -> Iterator[Edit]:
        block: Optional[EditOp] = None
        depth = 0

        for event, elem in iter_elements(
            self.source, self.BLOCKS + self.ELEMENTS, events=("start", "end")
        ):
            if elem.tag in self.BLOCKS:
                block = EditOp(elem.tag) if event == "start" else None
                continue

            # only elements directly inside a change block are edits
            if event == "start":
                depth += 1
                continue
            depth -= 1
            if block is None or depth != 0:
                continue

            edit = self._to_edit(elem, block)
            attached = self.store.add_edit(edit)
            self.edits += 1
            if not attached:
                error = UnknownChangeset(edit.changeset_id)
                self.unknown.append(error)
                logger.warning(
                    f"Parked {edit.op.value} of {edit.object.type.value} {edit.object.id}: {error}",
                    extra={"changeset_id": edit.changeset_id, "object_id": edit.object.id},
                )
            yield edit

        logger.info(
            f"Parsed {self.edits} edits, parked {len(self.unknown)}",
            extra={"edits": self.edits, "parked": len(self.unknown)},
        )

    def _to_edit(self, elem, op: EditOp) -> Edit:
        attrs = elem.attrib
        for required in ("id", "version", "changeset", "timestamp"):
            if attrs.get(required) is None:
                raise MalformedXml(
                    f"<{elem.tag}> without {required} attribute", elem.sourceline, None
                )

        try:
            object_type = ObjectType(elem.tag)
            object_id = int(attrs["id"])
            ver = int(attrs["version"])
            tags = _tags(elem)
            loc = self._location(elem, object_type)

            object_ver = ver
            if op == EditOp.DELETE:
                previous = self.store.previous_version((object_id, object_type), ver)
                if previous is not None:
                    tags = dict(previous.tags)
                    loc = loc or previous.loc
                    object_ver = previous.ver
                else:
                    object_ver = max(ver - 1, 1)

            return Edit(
                object=OsmObject(id=object_id, type=object_type, loc=loc, tags=tags, ver=object_ver),
                op=op,
                ver=ver,
                t=parse_timestamp(attrs["timestamp"]),
                changeset_id=int(attrs["changeset"]),
                uid=int(attrs["uid"]) if attrs.get("uid") else None,
            )
        except (ValueError, ValidationError) as e:
            raise MalformedXml(f"<{elem.tag} id={attrs.get('id')}>: {e}", elem.sourceline, None) from e

    def _location(self, elem, object_type: ObjectType) -> Tuple[Point, ...]:
        if object_type == ObjectType.NODE:
            lat, lon = elem.get("lat"), elem.get("lon")
            return ((float(lat), float(lon)),) if lat is not None and lon is not None else ()

        if object_type == ObjectType.WAY:
            refs = [int(nd.get("ref")) for nd in elem if nd.tag == "nd"]
        else:
            refs = [
                int(m.get("ref"))
                for m in elem
                if m.tag == "member" and m.get("type") == "node"
            ]

        points = []
        for ref in refs:
            position = self.store.node_position(ref)
            if position is not None:
                points.append(position)
        return tuple(points)


def parse_changeset_metadata(xml_stream: XmlSource) -> ChangesetDumpReader:
    """Stream of Changeset (edits empty); the reader counts skipped elements"""
    return ChangesetDumpReader(xml_stream)


def parse_osc(xml_stream: XmlSource, store: ChangesetStore) -> OscReader:
    """Stream of Edit, each attached to its changeset in the store while iterating"""
    return OscReader(xml_stream, store)


def parse_users(xml_stream: XmlSource) -> Iterator[Tuple[int, int]]:
    """(user id, account creation timestamp) pairs from OSM user XML"""
    for _, elem in iter_elements(xml_stream, ["user"]):
        uid, created = elem.get("id"), elem.get("account_created")
        if not uid or not created:
            logger.warning(
                "Skipping user without id or account_created",
                extra={"line": elem.sourceline},
            )
            continue
        yield int(uid), parse_timestamp(created)


def ingest(
    store: ChangesetStore,
    changesets: XmlSource,
    osc_files: Iterable[XmlSource] = (),
    users: Optional[XmlSource] = None,
) -> Dict[str, int]:
    """Populate a store from a changeset dump, osmChange files and optional user XML"""
    reader = parse_changeset_metadata(changesets)
    for changeset in reader:
        store.add_changeset(changeset)

    accounts = 0
    if users is not None:
        for uid, created in parse_users(users):
            store.set_account_created(uid, created)
            accounts += 1

    edits = parked = 0
    for osc in osc_files:
        osc_reader = parse_osc(osc, store)
        for _ in osc_reader:
            pass
        edits += osc_reader.edits
        parked += len(osc_reader.unknown)

    return {
        "changesets": reader.parsed,
        "skipped": reader.skipped,
        "accounts": accounts,
        "edits": edits,
        "parked": parked,
    }
