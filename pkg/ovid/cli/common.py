"""
Helpers shared by the sub-command modules
"""

import argparse
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

from ovid.config import ConfigLoader, load_flat_config, settings
from ovid.errors import DimMismatch, UsageError
from ovid.models.ovid_config import OvidConfig
from ovid.services.checkpoint import ModelCheckpoint
from ovid.services.dataset_io import FeatureFile


class OvidArgumentParser(argparse.ArgumentParser):
    """Raises UsageError instead of exiting, so the caller owns the exit code"""

    def error(self, message: str):
        raise UsageError(f"{self.prog}: {message}", self)


def add_seed(parser: argparse.ArgumentParser, default: int = 0) -> None:
    parser.add_argument("--seed", type=int, default=default, help="Seed for all randomness")


def add_out(parser: argparse.ArgumentParser, required: bool = True) -> None:
    parser.add_argument("--out", type=Path, required=required, help="Output directory")


def add_model_config(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="Flat key=value model config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="Override one config value; repeatable",
    )


def parse_ratios(text: str) -> Tuple[float, float, float]:
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError as e:
        raise UsageError(f"--ratios expects three comma-separated numbers, got {text!r}") from e
    if len(parts) != 3:
        raise UsageError(f"--ratios expects three comma-separated numbers, got {text!r}")
    return parts


def parse_overrides(items: List[str]) -> Dict[str, str]:
    overrides = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()
    return overrides


def load_model_config(args: argparse.Namespace) -> OvidConfig:
    """Default file (or --config) with --set values and --seed applied on top"""
    if args.config is not None:
        values = load_flat_config(args.config)
    else:
        values = ConfigLoader(settings.config_dir).load_default_config()
    overrides: Dict[str, Any] = parse_overrides(args.overrides)
    overrides["seed"] = args.seed
    return OvidConfig.from_flat(values, overrides)


def flags_of(args: argparse.Namespace) -> Dict[str, Any]:
    flags = {}
    for key, value in sorted(vars(args).items()):
        if key in ("handler", "parser"):
            continue
        if isinstance(value, Path):
            value = str(value)
        elif isinstance(value, list):
            value = [str(v) if isinstance(v, Path) else v for v in value]
        flags[key] = value
    return flags


def check_compatible(cp: ModelCheckpoint, features: FeatureFile, source: Optional[Path] = None) -> None:
    """Checkpoint and feature file must agree on dimensions and editor vocabulary"""
    where = f" in {source}" if source else ""
    if (cp.d_c, cp.d_u, cp.d_e) != (features.d_c, features.d_u, features.d_e):
        raise DimMismatch(
            f"Checkpoint expects d_c={cp.d_c} d_u={cp.d_u} d_e={cp.d_e}, features{where} have "
            f"d_c={features.d_c} d_u={features.d_u} d_e={features.d_e}"
        )
    if cp.vocabulary_hash != features.vocabulary_hash:
        raise DimMismatch(f"Editor vocabulary of features{where} differs from the checkpoint's")
