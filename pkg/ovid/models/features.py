"""
Feature containers: per-changeset feature bundles and normalization statistics
"""

from typing import List, Optional

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

D_USER = 7
D_EDIT = 15
CHANGESET_BASE_DIM = 11

CHANGESET_COUNT_NAMES = ["n_creates", "n_modifications", "n_deletes", "n_edits"]
CHANGESET_GEO_NAMES = ["min_lat", "max_lat", "min_lon", "max_lon", "bbox_size"]
CHANGESET_TAIL_NAMES = ["has_imagery", "comment_length"]

USER_FEATURE_NAMES = [
    "past_creates",
    "past_modifications",
    "past_deletes",
    "n_contributions",
    "n_top12_keys_used",
    "account_creation",
    "n_active_weeks",
]

EDIT_FEATURE_NAMES = [
    "type_node",
    "type_way",
    "type_relation",
    "op_create",
    "op_modify",
    "op_delete",
    "version_number",
    "n_previous_authors",
    "time_to_previous_version",
    "n_tags_total",
    "n_tags_added",
    "n_tags_deleted",
    "n_valid_tags",
    "n_previous_valid_tags",
    "name_changed",
]

# column positions used by the rule baseline and tests
EDIT_VERSION = EDIT_FEATURE_NAMES.index("version_number")
EDIT_TAGS_DELETED = EDIT_FEATURE_NAMES.index("n_tags_deleted")
EDIT_VALID_TAGS = EDIT_FEATURE_NAMES.index("n_valid_tags")
EDIT_NAME_CHANGED = EDIT_FEATURE_NAMES.index("name_changed")
USER_CONTRIBUTIONS = USER_FEATURE_NAMES.index("n_contributions")


def changeset_feature_names(editor_slots: List[str]) -> List[str]:
    return (
        CHANGESET_COUNT_NAMES
        + CHANGESET_GEO_NAMES
        + [f"editor_{slot}" for slot in editor_slots]
        + CHANGESET_TAIL_NAMES
    )


class EditFeatures(BaseModel):
    """One column of the edit matrix, plus whether history slots were zero-filled"""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    values: np.ndarray
    missing_history: bool = False


class FeatureBundle(BaseModel):
    """
    Features of one (optionally labeled) changeset

    m_e has shape (d_e, n_edits); its columns follow changeset edit order.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    changeset_id: int
    user_id: int
    label: Optional[int] = None
    split: Optional[str] = None
    x_c: np.ndarray
    x_u: np.ndarray
    m_e: np.ndarray
    missing_history: bool = False

    @field_validator("x_c", "x_u", "m_e", mode="before")
    @classmethod
    def _as_float_array(cls, value):
        return np.asarray(value, dtype=np.float64)

    @property
    def n_edits(self) -> int:
        return int(self.m_e.shape[1])


class NormStats(BaseModel):
    """Per-dimension z-score statistics fitted on the training split"""

    c_mean: List[float]
    c_std: List[float]
    u_mean: List[float]
    u_std: List[float]
    e_mean: List[float] = Field(default_factory=lambda: [0.0] * D_EDIT)
    e_std: List[float] = Field(default_factory=lambda: [0.0] * D_EDIT)
