"""
JSON-lines container shared by the store, dataset and feature files

Layout: one header object carrying {"schema", "version", ...}, body records
each tagged with "kind", and a closing {"kind": "end", "records": N}.
"""

import json
import logging
from pathlib import Path
from typing import Any, Dict, Iterable, Iterator, Tuple

from ovid.errors import SchemaVersionMismatch, StoreIoError

logger = logging.getLogger(__name__)


def encode_record(record: Dict[str, Any]) -> bytes:
    return (
        json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False) + "\n"
    ).encode("utf-8")


def decode_record(line: bytes, index: int, offset: int) -> Dict[str, Any]:
    if not line.endswith(b"\n"):
        raise StoreIoError("Truncated record", index, offset)
    try:
        record = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise StoreIoError(f"Unreadable record: {e}", index, offset) from e
    if not isinstance(record, dict):
        raise StoreIoError("Record is not an object", index, offset)
    return record


def write_jsonl(path: str | Path, header: Dict[str, Any], records: Iterable[Dict[str, Any]]) -> int:
    """Write header, records and end trailer; returns the body record count"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    count = 0
    with open(path, "wb") as f:
        f.write(encode_record(header))
        for record in records:
            f.write(encode_record(record))
            count += 1
        f.write(encode_record({"kind": "end", "records": count}))
    return count


class JsonlReader:
    """
    Reads a file written by write_jsonl

    The header is checked on construction. Iterating yields
    (record index, byte offset, record) for body records and verifies the
    end trailer once the body is exhausted.
    """

    def __init__(self, path: str | Path, schema: str, version: int):
        self.path = Path(path)
        try:
            self._file = open(self.path, "rb")
        except OSError as e:
            raise StoreIoError(f"Cannot read {self.path}: {e}") from e

        header_line = self._file.readline()
        try:
            self.header = decode_record(header_line, 0, 0)
        except StoreIoError:
            self._file.close()
            raise
        if self.header.get("schema") != schema or self.header.get("version") != version:
            self._file.close()
            raise SchemaVersionMismatch(
                f"{self.path}: expected {schema} v{version}, "
                f"got {self.header.get('schema')} v{self.header.get('version')}"
            )
        self._offset = len(header_line)

    def __iter__(self) -> Iterator[Tuple[int, int, Dict[str, Any]]]:
        count = 0
        offset = self._offset
        with self._file:
            for index, line in enumerate(self._file, start=1):
                record = decode_record(line, index, offset)
                if record.get("kind") == "end":
                    if record.get("records") != count:
                        raise StoreIoError(
                            f"{self.path}: end record counts {record.get('records')}, read {count}",
                            index,
                            offset,
                        )
                    return
                yield index, offset, record
                count += 1
                offset += len(line)
        raise StoreIoError(f"{self.path}: truncated file, no end record", count + 1, offset)
