"""
Tuner
Random search over the hyperparameter space and the ablation study.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from ovid.config import settings
from ovid.core.evaluation import ConfusionCounts, Metrics, confusion, metrics, threshold_predictions
from ovid.core.model import ABLATION_VARIANTS, OvidModel, ablate
from ovid.core.trainer import TrainingResult, train
from ovid.models.features import FeatureBundle
from ovid.models.ovid_config import SEARCH_SPACE, OvidConfig

logger = logging.getLogger(__name__)

DEFAULT_TRIALS = 30
FULL_MODEL = "OVID"


class Trial(BaseModel):
    index: int
    config: OvidConfig
    metrics: Metrics
    val_loss: float
    epochs: int
    best_epoch: int


def score_model(model: OvidModel, bundles: Sequence[FeatureBundle]) -> Tuple[ConfusionCounts, Metrics]:
    scores = model.predict_many(bundles)
    counts = confusion(threshold_predictions(scores, model.config.th_class), [b.label for b in bundles])
    return counts, metrics(counts)


def sample_configs(n_trials: int, seed: int, base: Optional[OvidConfig] = None) -> List[OvidConfig]:
    """
    n_trials configs drawn uniformly with replacement from SEARCH_SPACE

    Each trial gets its own seed from the search generator; it seeds both the
    draw and the trial's training.
    """
    base = base or OvidConfig()
    rng = np.random.default_rng(seed)
    trial_seeds = rng.integers(0, 2**31, size=n_trials)
    configs = []
    for trial_seed in trial_seeds:
        draw = np.random.default_rng(int(trial_seed))
        values = {name: options[int(draw.integers(len(options)))] for name, options in SEARCH_SPACE.items()}
        configs.append(
            OvidConfig.model_validate({**base.model_dump(), **values, "seed": int(trial_seed)})
        )
    return configs


def _run_trial(
    index: int,
    config: OvidConfig,
    train_set: Sequence[FeatureBundle],
    val_set: Sequence[FeatureBundle],
) -> Tuple[Trial, TrainingResult]:
    result = train(train_set, val_set, config)
    trial = Trial(
        index=index,
        config=config,
        metrics=score_model(result.model, val_set)[1],
        val_loss=result.best_val_loss,
        epochs=result.epochs_run,
        best_epoch=result.best_epoch,
    )
    logger.info(
        f"Trial {index} validation F1 {trial.metrics.f1:.4f}",
        extra={"trial": index, "f1": trial.metrics.f1, "accuracy": trial.metrics.accuracy},
    )
    return trial, result


def random_search(
    train_set: Sequence[FeatureBundle],
    val_set: Sequence[FeatureBundle],
    n_trials: int = DEFAULT_TRIALS,
    seed: int = 0,
    base: Optional[OvidConfig] = None,
    threads: Optional[int] = None,
) -> Tuple[Trial, List[Trial], TrainingResult]:
    """
    Train one model per sampled config and rank them

    Ranking is by validation F1, then validation accuracy, then trial index.

    Returns:
        (best trial, all trials in index order, best trial's training result)
    """
    configs = sample_configs(n_trials, seed, base)
    workers = max(1, min(threads or settings.threads, n_trials))
    logger.info(
        f"Random search over {n_trials} trials",
        extra={"trials": n_trials, "seed": seed, "workers": workers},
    )

    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_trial, i, config, train_set, val_set) for i, config in enumerate(configs)
        ]
        outcomes = [f.result() for f in futures]

    trials = [trial for trial, _ in outcomes]
    best_index = min(
        range(len(trials)),
        key=lambda i: (-trials[i].metrics.f1, -trials[i].metrics.accuracy, trials[i].index),
    )
    return trials[best_index], trials, outcomes[best_index][1]


class AblationRow(BaseModel):
    variant: str
    counts: ConfusionCounts
    metrics: Metrics
    epochs: int


def run_ablation_study(
    train_set: Sequence[FeatureBundle],
    val_set: Sequence[FeatureBundle],
    test_set: Sequence[FeatureBundle],
    config: OvidConfig,
    variants: Optional[Sequence[str]] = None,
) -> List[AblationRow]:
    """Full model plus each ablation variant, same seed and settings, scored on test_set"""
    variants = list(variants) if variants is not None else list(ABLATION_VARIANTS)
    configs: Dict[str, OvidConfig] = {FULL_MODEL: config}
    for variant in variants:
        configs[variant] = ablate(config, variant)

    rows = []
    for name, variant_config in configs.items():
        result = train(train_set, val_set, variant_config)
        counts, scored = score_model(result.model, test_set)
        rows.append(AblationRow(variant=name, counts=counts, metrics=scored, epochs=result.epochs_run))
        logger.info(f"Ablation {name} done", extra={"variant": name, "f1": rows[-1].metrics.f1})
    return rows
