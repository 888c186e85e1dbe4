"""
Model checkpoints

File layout (integers little-endian):
    b"OVIDCKPT" | u32 format version
    | u64 length + header JSON (config, parameter names/shapes, norm stats, dims, ...)
    | u64 length + parameter blob (float64, in header order)
    | u64 length + reference batch JSON (feature bundles)
    | u64 length + reference predictions (float64)
    | 32-byte SHA-256 of everything before it
"""

import hashlib
import json
import logging
import struct
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from ovid import __version__
from ovid.core.model import OvidModel
from ovid.errors import (
    ChecksumMismatch,
    DataError,
    FormatVersionMismatch,
    ReferencePredictionMismatch,
    StoreIoError,
)
from ovid.models.features import FeatureBundle, NormStats
from ovid.models.ovid_config import OvidConfig
from ovid.neural.init import INIT_SCHEME

logger = logging.getLogger(__name__)

MAGIC = b"OVIDCKPT"
FORMAT_VERSION = 1
CHECKPOINT_FILE = "model.ckpt"
REFERENCE_SIZE = 8


class ModelCheckpoint(BaseModel):
    """A trained model with everything needed to reproduce its predictions"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    config: OvidConfig
    params: Dict[str, np.ndarray]
    norm: NormStats
    d_c: int
    d_u: int
    d_e: int
    vocabulary_hash: str
    top12_mode: str = "additions"
    training: Dict[str, Any] = Field(default_factory=dict)
    reference: List[FeatureBundle] = Field(default_factory=list)
    reference_predictions: Optional[np.ndarray] = None
    format_version: int = FORMAT_VERSION

    def build_model(self) -> OvidModel:
        model = OvidModel(self.config, self.d_c, self.d_u, self.d_e)
        model.load_state(self.params)
        return model


def checkpoint_from_model(
    model: OvidModel,
    norm: NormStats,
    vocabulary_hash: str,
    reference: Sequence[FeatureBundle],
    top12_mode: str = "additions",
    training: Optional[Dict[str, Any]] = None,
) -> ModelCheckpoint:
    """Freeze a model and record its predictions on the reference bundles"""
    reference = list(reference)[:REFERENCE_SIZE]
    return ModelCheckpoint(
        config=model.config,
        params=model.state(),
        norm=norm,
        d_c=model.d_c,
        d_u=model.d_u,
        d_e=model.d_e,
        vocabulary_hash=vocabulary_hash,
        top12_mode=top12_mode,
        training={
            "batch_size": model.config.batch_size,
            "learning_rate": model.config.learning_rate,
            "patience": model.config.patience,
            "dropout_placement": "after prediction FC, before norm",
            "init": INIT_SCHEME,
            **(training or {}),
        },
        reference=reference,
        reference_predictions=model.predict_many(reference),
    )


def _section(data: bytes) -> bytes:
    return struct.pack("<Q", len(data)) + data


def _bundle_json(bundle: FeatureBundle) -> Dict[str, Any]:
    return {
        "changeset_id": bundle.changeset_id,
        "user_id": bundle.user_id,
        "x_c": bundle.x_c.tolist(),
        "x_u": bundle.x_u.tolist(),
        "m_e": bundle.m_e.tolist(),
        "n_edits": bundle.n_edits,
        "missing_history": bundle.missing_history,
    }


def encode_checkpoint(cp: ModelCheckpoint) -> bytes:
    names = list(cp.params)
    header = {
        "tool_version": __version__,
        "config": cp.config.model_dump(),
        "params": [{"name": n, "shape": list(cp.params[n].shape)} for n in names],
        "norm": cp.norm.model_dump(),
        "d_c": cp.d_c,
        "d_u": cp.d_u,
        "d_e": cp.d_e,
        "vocabulary_hash": cp.vocabulary_hash,
        "top12_mode": cp.top12_mode,
        "training": cp.training,
    }
    blob = b"".join(np.ascontiguousarray(cp.params[n], dtype="<f8").tobytes() for n in names)
    reference = [_bundle_json(b) for b in cp.reference]
    predictions = np.asarray(
        cp.reference_predictions if cp.reference_predictions is not None else [], dtype="<f8"
    )

    body = (
        MAGIC
        + struct.pack("<I", cp.format_version)
        + _section(json.dumps(header, sort_keys=True).encode("utf-8"))
        + _section(blob)
        + _section(json.dumps(reference, sort_keys=True).encode("utf-8"))
        + _section(predictions.tobytes())
    )
    return body + hashlib.sha256(body).digest()


def save_checkpoint(cp: ModelCheckpoint, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    data = encode_checkpoint(cp)
    with open(path, "wb") as f:
        f.write(data)
    logger.info(
        f"Saved checkpoint with {len(cp.params)} parameter tensors",
        extra={"path": str(path), "bytes": len(data)},
    )


class _Cursor:
    def __init__(self, data: bytes, path: Path):
        self.data = data
        self.pos = 0
        self.path = path

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise StoreIoError(f"{self.path}: checkpoint truncated", offset=self.pos)
        chunk = self.data[self.pos : self.pos + n]
        self.pos += n
        return chunk

    def section(self) -> bytes:
        (length,) = struct.unpack("<Q", self.take(8))
        return self.take(length)


def decode_checkpoint(data: bytes, path: str | Path = "<bytes>") -> ModelCheckpoint:
    """Parse and verify checkpoint bytes; raises on version, checksum or prediction mismatch"""
    path = Path(path)
    cursor = _Cursor(data, path)
    if cursor.take(len(MAGIC)) != MAGIC:
        raise DataError(f"{path} is not an OVID checkpoint")
    (version,) = struct.unpack("<I", cursor.take(4))
    if version != FORMAT_VERSION:
        raise FormatVersionMismatch(
            f"{path}: checkpoint format v{version}, this tool reads v{FORMAT_VERSION}"
        )
    if len(data) < 32 or hashlib.sha256(data[:-32]).digest() != data[-32:]:
        raise ChecksumMismatch(f"{path}: checkpoint checksum does not match its contents")

    try:
        header = json.loads(cursor.section().decode("utf-8"))
        blob = cursor.section()
        reference_json = json.loads(cursor.section().decode("utf-8"))
        predictions = np.frombuffer(cursor.section(), dtype="<f8").astype(np.float64)
    except (UnicodeDecodeError, json.JSONDecodeError, ValueError) as e:
        raise StoreIoError(f"{path}: unreadable checkpoint section: {e}") from e

    params: Dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["params"]:
        size = int(np.prod(entry["shape"]))
        chunk = blob[offset * 8 : (offset + size) * 8]
        if len(chunk) != size * 8:
            raise StoreIoError(f"{path}: parameter blob too short for {entry['name']}")
        params[entry["name"]] = np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(entry["shape"])
        offset += size

    d_e = header["d_e"]
    reference = [
        FeatureBundle(
            changeset_id=r["changeset_id"],
            user_id=r["user_id"],
            x_c=r["x_c"],
            x_u=r["x_u"],
            m_e=np.asarray(r["m_e"], dtype=np.float64).reshape(d_e, r["n_edits"]),
            missing_history=r["missing_history"],
        )
        for r in reference_json
    ]

    cp = ModelCheckpoint(
        config=OvidConfig.model_validate(header["config"]),
        params=params,
        norm=NormStats.model_validate(header["norm"]),
        d_c=header["d_c"],
        d_u=header["d_u"],
        d_e=d_e,
        vocabulary_hash=header["vocabulary_hash"],
        top12_mode=header.get("top12_mode", "additions"),
        training=header.get("training", {}),
        reference=reference,
        reference_predictions=predictions,
        format_version=version,
    )

    replayed = cp.build_model().predict_many(reference)
    if replayed.shape != predictions.shape or not np.array_equal(replayed, predictions):
        raise ReferencePredictionMismatch(
            f"{path}: reloaded model does not reproduce the stored reference predictions"
        )
    return cp


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as e:
        raise StoreIoError(f"Cannot read checkpoint {path}: {e}") from e
    cp = decode_checkpoint(data, path)
    logger.info("Loaded checkpoint", extra={"path": str(path), "params": len(cp.params)})
    return cp
