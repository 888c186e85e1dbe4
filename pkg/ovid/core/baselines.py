"""
Baselines
Rule-score baseline with exhaustive threshold search, and a random-forest
baseline over aggregated changeset, user and edit features.
"""

import itertools
import logging
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field
from sklearn.ensemble import RandomForestClassifier

from ovid.config import settings
from ovid.core.evaluation import confusion, metrics
from ovid.models.features import (
    D_EDIT,
    EDIT_NAME_CHANGED,
    EDIT_TAGS_DELETED,
    EDIT_VALID_TAGS,
    EDIT_VERSION,
    USER_CONTRIBUTIONS,
    FeatureBundle,
)

logger = logging.getLogger(__name__)

RULES = ("low_contributions", "low_valid_tags", "high_version", "name_changed", "large_deletion")

DEFAULT_RULE_GRID: Dict[str, List[Optional[float]]] = {
    "low_contributions": [None, 0, 5, 10, 50, 100],
    "low_valid_tags": [None, 0, 1, 2],
    "high_version": [None, 2, 5, 10],
    "name_changed": [None, 1],
    "large_deletion": [None, 1, 3, 5],
    "min_score": [1, 2, 3],
}


class RuleThresholds(BaseModel):
    """
    One threshold per rule; None disables the rule

    low_* rules fire at or below their threshold, the others at or above it.
    An edit is flagged when at least min_score rules fire.
    """

    low_contributions: Optional[float] = None
    low_valid_tags: Optional[float] = None
    high_version: Optional[float] = None
    name_changed: Optional[float] = None
    large_deletion: Optional[float] = None
    min_score: int = Field(default=1, ge=1)


class _EditTable:
    """Rule inputs of every edit in a bundle list, flattened with owner indices"""

    def __init__(self, bundles: Sequence[FeatureBundle]):
        self.n = len(bundles)
        owners, columns, contributions = [], [], []
        for index, bundle in enumerate(bundles):
            owners.extend([index] * bundle.n_edits)
            columns.append(bundle.m_e)
            contributions.extend([bundle.x_u[USER_CONTRIBUTIONS]] * bundle.n_edits)
        m = np.concatenate(columns, axis=1) if columns else np.zeros((D_EDIT, 0))
        self.owners = np.asarray(owners, dtype=int)
        self.inputs = {
            "low_contributions": np.asarray(contributions, dtype=np.float64),
            "low_valid_tags": m[EDIT_VALID_TAGS],
            "high_version": m[EDIT_VERSION],
            "name_changed": m[EDIT_NAME_CHANGED],
            "large_deletion": m[EDIT_TAGS_DELETED],
        }

    def fired(self, rule: str, threshold: Optional[float]) -> np.ndarray:
        values = self.inputs[rule]
        if threshold is None:
            return np.zeros(values.shape, dtype=int)
        if rule.startswith("low_"):
            return (values <= threshold).astype(int)
        return (values >= threshold).astype(int)

    def predict(self, thresholds: RuleThresholds) -> np.ndarray:
        score = sum(self.fired(rule, getattr(thresholds, rule)) for rule in RULES)
        flagged = np.asarray(score) >= thresholds.min_score
        predictions = np.zeros(self.n, dtype=int)
        predictions[np.unique(self.owners[flagged])] = 1
        return predictions


def rule_baseline(bundles: Sequence[FeatureBundle], thresholds: RuleThresholds) -> np.ndarray:
    """1 for every changeset with at least one flagged edit; raw (unnormalized) features expected"""
    return _EditTable(bundles).predict(thresholds)


def grid_search_rules(
    bundles: Sequence[FeatureBundle],
    grid: Optional[Dict[str, List[Optional[float]]]] = None,
) -> Tuple[RuleThresholds, float]:
    """Threshold vector with the best F1 on bundles; the first of equal scores wins"""
    grid = grid or DEFAULT_RULE_GRID
    names = [name for name in (*RULES, "min_score") if name in grid]
    table = _EditTable(bundles)
    labels = [b.label for b in bundles]

    best, best_f1 = None, -1.0
    for values in itertools.product(*(grid[name] for name in names)):
        thresholds = RuleThresholds(**dict(zip(names, values)))
        f1 = metrics(confusion(table.predict(thresholds), labels)).f1
        if f1 > best_f1:
            best, best_f1 = thresholds, f1

    logger.info(
        f"Rule grid search best F1 {best_f1:.4f}",
        extra={"thresholds": best.model_dump(), "examples": len(bundles)},
    )
    return best, best_f1


def aggregate_features(bundle: FeatureBundle) -> np.ndarray:
    """[x_c, x_u, mean over edits, max over edits]; edit parts are zero without edits"""
    if bundle.n_edits:
        edit_mean, edit_max = bundle.m_e.mean(axis=1), bundle.m_e.max(axis=1)
    else:
        edit_mean = edit_max = np.zeros(bundle.m_e.shape[0])
    return np.concatenate([bundle.x_c, bundle.x_u, edit_mean, edit_max])


def forest_baseline(
    train_set: Sequence[FeatureBundle],
    test_set: Sequence[FeatureBundle],
    seed: int,
    n_estimators: int = 100,
) -> np.ndarray:
    """0/1 predictions of a seeded random forest fitted on train_set"""
    x_train = np.stack([aggregate_features(b) for b in train_set])
    y_train = np.array([b.label for b in train_set], dtype=int)
    forest = RandomForestClassifier(
        n_estimators=n_estimators, random_state=seed, n_jobs=settings.threads
    )
    forest.fit(x_train, y_train)
    x_test = np.stack([aggregate_features(b) for b in test_set])
    return forest.predict(x_test).astype(int)
