"""
Run context for sub-commands
Logs run start/completion/failure with a run id and writes the run manifest.
"""

import json
import logging
import time
import uuid
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional

from pydantic import BaseModel, Field

from ovid import __version__
from ovid.errors import DataError, OvidError, StoreIoError

logger = logging.getLogger(__name__)

MANIFEST_FILE = "manifest.json"


class RunManifest(BaseModel):
    """
    What a sub-command was asked to do

    Replaying argv reproduces every output except wall_time.
    """

    subcommand: str
    argv: List[str]
    flags: Dict[str, Any]
    seeds: Dict[str, int] = Field(default_factory=dict)
    inputs: Dict[str, Any] = Field(default_factory=dict)
    outputs: List[str] = Field(default_factory=list)
    tool_version: str = __version__
    wall_time: float = 0.0


def write_manifest(out_dir: str | Path, manifest: RunManifest) -> Path:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / MANIFEST_FILE
    path.write_text(json.dumps(manifest.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def read_manifest(path: str | Path) -> RunManifest:
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_FILE
    try:
        return RunManifest.model_validate_json(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise StoreIoError(f"Cannot read manifest {path}: {e}") from e
    except ValueError as e:
        raise DataError(f"{path}: invalid run manifest: {e}") from e


class RunContext:
    """Mutable facts a sub-command collects while it runs"""

    def __init__(self, subcommand: str, argv: List[str], flags: Dict[str, Any]):
        self.run_id = str(uuid.uuid4())
        self.subcommand = subcommand
        self.argv = argv
        self.flags = flags
        self.seeds: Dict[str, int] = {}
        self.inputs: Dict[str, Any] = {}
        self.outputs: List[str] = []
        self.out_dir: Optional[Path] = None
        self.start_time = time.time()

    def manifest(self) -> RunManifest:
        return RunManifest(
            subcommand=self.subcommand,
            argv=self.argv,
            flags=self.flags,
            seeds=self.seeds,
            inputs=self.inputs,
            outputs=sorted(self.outputs),
            wall_time=round(time.time() - self.start_time, 3),
        )


@contextmanager
def run_context(subcommand: str, argv: List[str], flags: Dict[str, Any]) -> Iterator[RunContext]:
    """
    Wraps one sub-command run
    - Generates a run id
    - Tracks wall time
    - Writes the manifest into ctx.out_dir on success
    """
    ctx = RunContext(subcommand, argv, flags)
    logger.info(f"Run started: {subcommand}", extra={"run_id": ctx.run_id, "subcommand": subcommand})

    try:
        yield ctx
    except Exception as e:
        duration_ms = (time.time() - ctx.start_time) * 1000
        logger.error(
            f"Run failed: {subcommand}",
            extra={
                "run_id": ctx.run_id,
                "subcommand": subcommand,
                "duration_ms": round(duration_ms, 2),
                "error": str(e),
            },
            exc_info=not isinstance(e, OvidError),
        )
        raise

    manifest = ctx.manifest()
    if ctx.out_dir is not None:
        write_manifest(ctx.out_dir, manifest)
    logger.info(
        f"Run completed: {subcommand}",
        extra={
            "run_id": ctx.run_id,
            "subcommand": subcommand,
            "duration_ms": round(manifest.wall_time * 1000, 2),
            "outputs": manifest.outputs,
        },
    )
