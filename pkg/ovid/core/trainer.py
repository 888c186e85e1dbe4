"""
Trainer
Mini-batch ADAM on mean BCE + L2 with early stopping on validation loss.
"""

import logging
import math
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel

from ovid.core.model import OvidModel
from ovid.errors import EmptySplit, TrainingDiverged
from ovid.models.features import FeatureBundle
from ovid.models.ovid_config import OvidConfig
from ovid.neural.ops import bce_loss, concat, l2_penalty
from ovid.neural.optim import AdamState, adam_step
from ovid.neural.tensor import Tensor, backward, zero_grad

logger = logging.getLogger(__name__)


class EpochRecord(BaseModel):
    epoch: int
    train_loss: float
    val_loss: float


class EarlyStopping:
    """
    Tracks the best validation loss and the parameters that produced it

    Stops once `patience` consecutive epochs fail to improve strictly.
    """

    def __init__(self, patience: int = 10):
        self.patience = patience
        self.best_loss = math.inf
        self.best_epoch = 0
        self.best_state: Optional[Dict[str, np.ndarray]] = None
        self.wait = 0

    def update(self, epoch: int, loss: float, model: Optional[OvidModel] = None) -> bool:
        """Record one epoch; returns True when training should stop"""
        if loss < self.best_loss:
            self.best_loss = loss
            self.best_epoch = epoch
            self.best_state = model.state() if model is not None else None
            self.wait = 0
            return False
        self.wait += 1
        return self.wait >= self.patience


class TrainingResult:
    """Trained model restored to its best validation epoch, plus the epoch log"""

    def __init__(self, model: OvidModel, log: List[EpochRecord], best_epoch: int, stopped_early: bool):
        self.model = model
        self.log = log
        self.best_epoch = best_epoch
        self.stopped_early = stopped_early

    @property
    def epochs_run(self) -> int:
        return len(self.log)

    @property
    def best_val_loss(self) -> float:
        return self.log[self.best_epoch - 1].val_loss


def batch_loss(
    model: OvidModel,
    batch: Sequence[FeatureBundle],
    l2_weight: float,
    train: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> Tuple[Tensor, Tensor]:
    """(mean BCE, mean BCE + L2) over one batch"""
    preds = concat([model.forward(b, train=train, rng=rng) for b in batch], axis=0)
    data_loss = bce_loss(preds, [b.label for b in batch])
    return data_loss, data_loss + l2_penalty(model.parameters(), l2_weight)


def dataset_loss(model: OvidModel, bundles: Sequence[FeatureBundle]) -> float:
    """Mean BCE in eval mode"""
    preds = concat([model.forward(b) for b in bundles], axis=0)
    return float(bce_loss(preds, [b.label for b in bundles]).value)


def train(
    train_set: Sequence[FeatureBundle],
    val_set: Sequence[FeatureBundle],
    config: OvidConfig,
    d_c: Optional[int] = None,
) -> TrainingResult:
    """
    Fit a fresh model on normalized bundles

    Args:
        train_set: labeled training bundles
        val_set: labeled validation bundles, monitored for early stopping
        config: model and training settings; config.seed drives init, shuffling and dropout
        d_c: changeset feature width, defaults to the first training bundle's

    Returns:
        TrainingResult with best-validation parameters restored
    """
    if not train_set:
        raise EmptySplit("Training split is empty")
    if not val_set:
        raise EmptySplit("Validation split is empty")

    model = OvidModel(config, d_c or train_set[0].x_c.shape[0])
    params = model.parameters()
    adam = AdamState(params, lr=config.learning_rate)
    shuffle_rng = np.random.default_rng([config.seed, 1])
    dropout_rng = np.random.default_rng([config.seed, 2])
    stopper = EarlyStopping(config.patience)
    log: List[EpochRecord] = []
    stopped_early = False

    logger.info(
        "Training started",
        extra={"train": len(train_set), "validation": len(val_set), "params": len(params)},
    )

    for epoch in range(1, config.max_epochs + 1):
        order = shuffle_rng.permutation(len(train_set))
        batch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = [train_set[i] for i in order[start : start + config.batch_size]]
            zero_grad(params)
            data_loss, loss = batch_loss(model, batch, config.l2_weight, train=True, rng=dropout_rng)
            backward(loss)
            adam_step(params, adam)
            batch_losses.append(float(data_loss.value) * len(batch))

        record = EpochRecord(
            epoch=epoch,
            train_loss=sum(batch_losses) / len(train_set),
            val_loss=dataset_loss(model, val_set),
        )
        log.append(record)
        logger.debug(
            f"Epoch {epoch}: train {record.train_loss:.5f} val {record.val_loss:.5f}",
            extra=record.model_dump(),
        )

        if stopper.update(epoch, record.val_loss, model):
            stopped_early = True
            break

    if stopper.best_state is None:
        raise TrainingDiverged(
            f"No finite validation loss in {len(log)} epochs; last was {log[-1].val_loss}"
        )
    model.load_state(stopper.best_state)
    logger.info(
        f"Training finished after {len(log)} epochs, best epoch {stopper.best_epoch}",
        extra={"epochs": len(log), "best_epoch": stopper.best_epoch, "best_val_loss": stopper.best_loss},
    )
    return TrainingResult(model, log, stopper.best_epoch, stopped_early)
