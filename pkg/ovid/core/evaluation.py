"""
Evaluation
Confusion counts, metrics, the threshold sweep and the random baseline.
"""

import logging
from typing import Iterable, List, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, Field

from ovid.errors import EmptyEvaluation

logger = logging.getLogger(__name__)

DEFAULT_SWEEP_POINTS = 100


class ConfusionCounts(BaseModel):
    tp: int = Field(default=0, ge=0)
    fp: int = Field(default=0, ge=0)
    tn: int = Field(default=0, ge=0)
    fn: int = Field(default=0, ge=0)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


class Metrics(BaseModel):
    precision: float
    recall: float
    f1: float
    accuracy: float


class PrPoint(BaseModel):
    threshold: float
    precision: float
    recall: float


class PrCurve(BaseModel):
    """Precision/recall at evenly spaced thresholds, ascending"""

    points: List[PrPoint]


def confusion(predicted: Iterable[int], actual: Iterable[int]) -> ConfusionCounts:
    """Counts from 0/1 predictions against 0/1 labels"""
    p = np.asarray(list(predicted), dtype=bool)
    y = np.asarray(list(actual), dtype=bool)
    return ConfusionCounts(
        tp=int(np.sum(p & y)),
        fp=int(np.sum(p & ~y)),
        tn=int(np.sum(~p & ~y)),
        fn=int(np.sum(~p & y)),
    )


def metrics(cc: ConfusionCounts) -> Metrics:
    """
    Precision, recall, F1 and accuracy

    Precision is 1.0 when nothing is predicted positive; recall is 0 without
    positives; F1 is 0 when precision and recall are both 0.
    """
    if cc.total == 0:
        raise EmptyEvaluation("No examples to evaluate")
    precision = cc.tp / (cc.tp + cc.fp) if cc.tp + cc.fp else 1.0
    recall = cc.tp / (cc.tp + cc.fn) if cc.tp + cc.fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return Metrics(
        precision=precision,
        recall=recall,
        f1=f1,
        accuracy=(cc.tp + cc.tn) / cc.total,
    )


def threshold_predictions(scores: Sequence[float], th_class: float) -> np.ndarray:
    """1 where score > th_class, strictly"""
    return (np.asarray(scores, dtype=np.float64) > th_class).astype(int)


def pr_sweep(scores: Sequence[Tuple[float, int]], n_points: int = DEFAULT_SWEEP_POINTS) -> PrCurve:
    """Precision/recall at n_points + 1 thresholds spanning [0, 1]"""
    if not scores:
        raise EmptyEvaluation("No scores to sweep")
    y_pred = np.array([s for s, _ in scores], dtype=np.float64)
    labels = np.array([label for _, label in scores], dtype=int)

    points = []
    for threshold in np.linspace(0.0, 1.0, n_points + 1):
        m = metrics(confusion(y_pred > threshold, labels))
        points.append(PrPoint(threshold=float(threshold), precision=m.precision, recall=m.recall))
    return PrCurve(points=points)


def random_baseline(n: int, seed: int) -> np.ndarray:
    """Fair-coin 0/1 label per example"""
    return np.random.default_rng(seed).integers(0, 2, size=n)
