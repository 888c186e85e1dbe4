"""
Labeled dataset models
"""

from enum import Enum
from typing import Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Label(str, Enum):
    VANDALISM = "vandalism"
    REGULAR = "regular"

    @property
    def as_int(self) -> int:
        return 1 if self == Label.VANDALISM else 0


class ProvenanceKind(str, Enum):
    EXPLICIT_MENTION = "explicit_mention"
    DELETION_ATTRIBUTION = "deletion_attribution"
    NEGATIVE_SAMPLE = "negative_sample"
    IMPORTED = "imported"  # converted from a published label file


class Provenance(BaseModel):
    """Why an example carries its label"""

    model_config = ConfigDict(frozen=True)

    kind: ProvenanceKind
    revert_id: Optional[int] = None
    object_id: Optional[int] = None
    object_type: Optional[str] = None
    source: Optional[str] = None


class LabeledExample(BaseModel):
    model_config = ConfigDict(frozen=True)

    changeset_id: int
    label: Label
    provenance: Provenance
    user_id: int

    @model_validator(mode="after")
    def _check_provenance(self):
        kind = self.provenance.kind
        if kind == ProvenanceKind.IMPORTED:
            return self
        if self.label == Label.VANDALISM and kind == ProvenanceKind.NEGATIVE_SAMPLE:
            raise ValueError(f"vandalism example {self.changeset_id} has negative-sample provenance")
        if self.label == Label.REGULAR and kind != ProvenanceKind.NEGATIVE_SAMPLE:
            raise ValueError(f"regular example {self.changeset_id} has {kind.value} provenance")
        return self


SPLIT_NAMES = ("train", "validation", "test")


class DatasetSplit(BaseModel):
    """User-disjoint train/validation/test partition"""

    train: List[LabeledExample] = Field(default_factory=list)
    validation: List[LabeledExample] = Field(default_factory=list)
    test: List[LabeledExample] = Field(default_factory=list)
    ratios: Tuple[float, float, float] = (0.70, 0.10, 0.20)
    seed: int = 0

    @model_validator(mode="after")
    def _check_disjoint(self):
        seen_ids: Dict[int, str] = {}
        user_split: Dict[int, str] = {}
        for name in SPLIT_NAMES:
            for example in getattr(self, name):
                if example.changeset_id in seen_ids:
                    raise ValueError(f"changeset {example.changeset_id} in more than one split")
                seen_ids[example.changeset_id] = name
                owner = user_split.setdefault(example.user_id, name)
                if owner != name:
                    raise ValueError(f"user {example.user_id} appears in {owner} and {name}")
        return self

    def part(self, name: str) -> List[LabeledExample]:
        return getattr(self, name)

    def assignment(self) -> Dict[int, str]:
        """changeset id -> split name"""
        return {e.changeset_id: name for name in SPLIT_NAMES for e in self.part(name)}


class DatasetManifest(BaseModel):
    """Header of a dataset file: how it was drawn and what it holds"""

    seed: Optional[int] = None
    ratios: Optional[Tuple[float, float, float]] = None
    counts: Dict[str, int] = Field(default_factory=dict)
    source: str = "mined"
