"""
Model configuration
"""

from typing import Dict, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ovid.errors import ConfigViolation, UsageError

# Hyperparameter search space
SEARCH_SPACE: Dict[str, tuple] = {
    "th_e_max": (10, 20, 30),
    "n_pred": (1, 2, 3, 4, 5),
    "n_head": (5, 10, 15, 20),
    "d_h": (12, 24, 36, 48),
    "dropout": (0.4, 0.5, 0.6, 0.7),
    "l2_weight": (0.005, 0.01, 0.02),
}


class OvidConfig(BaseModel):
    """
    Architecture, regularization and training settings of one model

    Dropout sits after each prediction-block FC, before its normalization.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    # Architecture
    th_e_max: int = Field(default=20, ge=1)
    n_pred: int = Field(default=2, ge=1)
    n_head: int = Field(default=5, ge=1)
    d_h: int = Field(default=24, ge=1)

    # Regularization
    dropout: float = Field(default=0.5, ge=0.0, lt=1.0)
    l2_weight: float = Field(default=0.01, ge=0.0)

    th_class: float = Field(default=0.5, ge=0.0, le=1.0)

    # Ablation flags
    use_changeset: bool = True
    use_user: bool = True
    use_edits: bool = True

    # Training
    batch_size: int = Field(default=64, ge=1)
    learning_rate: float = Field(default=1e-3, gt=0.0)
    max_epochs: int = Field(default=100, ge=1)
    patience: int = Field(default=10, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_branches(self):
        if not (self.use_changeset or self.use_user):
            raise ConfigViolation(
                "Edit aggregation needs the changeset or the user branch; both are disabled"
            )
        return self

    @classmethod
    def from_flat(
        cls, values: Mapping[str, str], overrides: Optional[Mapping[str, object]] = None
    ) -> "OvidConfig":
        """Build from key=value strings, with command-line overrides applied on top"""
        merged = dict(values)
        merged.update({k: v for k, v in (overrides or {}).items() if v is not None})
        unknown = sorted(set(merged) - set(cls.model_fields))
        if unknown:
            raise UsageError(f"Unknown config keys: {', '.join(unknown)}")
        try:
            return cls.model_validate(merged)
        except ValidationError as e:
            raise UsageError(f"Invalid model config: {e}") from e

    def to_flat(self) -> str:
        return "".join(f"{k}={_flat_value(v)}\n" for k, v in self.model_dump().items())


def _flat_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    return str(value)
