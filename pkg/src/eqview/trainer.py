"""Training and evaluation loops with history logging.

One training thread owns the model; epochs visit the training set in a
seeded permutation, assemble augmented batches, and apply SGDM.  History
files (JSONL/CSV) carry per-epoch loss and accuracies; wall-clock time is
tracked in memory only so emitted reports are byte-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .augment import AugmentConfig, augment_sample, eval_sample
from .engine import SGDM, save_model, softmax, softmax_cross_entropy
from .imaging import Image16
from .rng import SplitMix64, derive_seed

# Seed-lane salt separating the epoch-shuffle stream from per-sample
# augmentation streams.
_SHUFFLE_LANE = 0x51CFFE


class EmptyDataset(ValueError):
    """Training or evaluation data is empty."""


class NonFiniteLoss(RuntimeError):
    """Loss became NaN/inf; training aborts with diagnostics."""


@dataclass
class ImageDataset:
    """In-memory dataset: 16-bit rasters with integer class labels."""

    images: list[Image16]
    labels: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if len(self.images) != self.labels.shape[0]:
            raise ValueError("images/labels length mismatch")

    def __len__(self) -> int:
        return len(self.images)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 32
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 0
    augment: AugmentConfig = field(default_factory=AugmentConfig)
    checkpoint_path: str | None = None

    def __post_init__(self):
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_acc: float
    wall_clock: float


@dataclass
class TrainingHistory:
    records: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_acc: float = -1.0

    def to_jsonl(self) -> str:
        lines = [
            json.dumps(
                {
                    "epoch": r.epoch,
                    "train_loss": r.train_loss,
                    "train_acc": r.train_acc,
                    "val_acc": r.val_acc,
                }
            )
            for r in self.records
        ]
        return "\n".join(lines) + "\n" if lines else ""

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["epoch", "train_loss", "train_acc", "val_acc"])
        for r in self.records:
            writer.writerow([r.epoch, repr(r.train_loss), repr(r.train_acc), repr(r.val_acc)])
        return buf.getvalue()


def _model_dtype(model) -> np.dtype:
    return model.parameters()[0][1].data.dtype


def _assemble_batch(model, samples: list[np.ndarray]) -> np.ndarray:
    batch = np.stack(samples)[:, None, :, :].astype(_model_dtype(model))
    if model.input_channels == 3 and batch.shape[1] == 1:
        batch = np.repeat(batch, 3, axis=1)
    elif batch.shape[1] != model.input_channels:
        raise ValueError(
            f"model expects {model.input_channels} channels, batch has {batch.shape[1]}"
        )
    return batch


def train(model, train_data: ImageDataset, val_data: ImageDataset,
          cfg: TrainConfig):
    """Train the model; returns (model, TrainingHistory).

    Per epoch: seeded permutation, augmented batches, forward, softmax
    cross-entropy, backward, SGDM step; then one evaluation pass on the
    validation set.  A checkpoint is written whenever validation top-1
    improves (best-validation model retention).
    """
    if len(train_data) == 0 or len(val_data) == 0:
        raise EmptyDataset("train and validation data must be non-empty")
    optimizer = SGDM(model.parameters(), lr=cfg.lr, momentum=cfg.momentum)
    history = TrainingHistory()
    # Evaluation-time views are deterministic; build the validation batches
    # once instead of once per epoch.
    val_batches = [
        _assemble_batch(
            model,
            [eval_sample(img, model.input_side)
             for img in val_data.images[lo:lo + cfg.batch_size]],
        )
        for lo in range(0, len(val_data), cfg.batch_size)
    ]
    for epoch in range(1, cfg.epochs + 1):
        start = time.monotonic()
        order = list(range(len(train_data)))
        SplitMix64(derive_seed(cfg.seed ^ _SHUFFLE_LANE, epoch, 0)).shuffle(order)
        total_loss = 0.0
        total_correct = 0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            samples = [
                augment_sample(train_data.images[i], cfg.augment,
                               derive_seed(cfg.seed, epoch, i))
                for i in idx
            ]
            batch = _assemble_batch(model, samples)
            targets = train_data.labels[idx]
            optimizer.zero_grad()
            logits = model.forward(batch, mode="train")
            loss, dlogits = softmax_cross_entropy(logits, targets)
            if not math.isfinite(loss):
                raise NonFiniteLoss(
                    f"non-finite loss {loss} at epoch {epoch}, batch offset {lo}"
                )
            model.backward(dlogits)
            optimizer.step()
            total_loss += loss * len(idx)
            total_correct += int((logits.argmax(axis=1) == targets).sum())
        val_preds = np.concatenate(
            [model.forward(vb, mode="eval").argmax(axis=1) for vb in val_batches]
        )
        val_acc = float(np.mean(val_preds == val_data.labels))
        record = EpochRecord(
            epoch=epoch,
            train_loss=total_loss / len(order),
            train_acc=total_correct / len(order),
            val_acc=val_acc,
            wall_clock=time.monotonic() - start,
        )
        history.records.append(record)
        if val_acc > history.best_val_acc:
            history.best_val_acc = val_acc
            history.best_epoch = epoch
            if cfg.checkpoint_path:
                save_model(model, cfg.checkpoint_path)
    return model, history


def evaluate(model, data: ImageDataset, batch_size: int = 32):
    """Deterministic evaluation: running batch-norm statistics, center
    crops, no augmentation.  Returns (predictions, probability rows);
    argmax ties break to the lowest class index."""
    if len(data) == 0:
        raise EmptyDataset("evaluation data must be non-empty")
    out_side = model.input_side
    preds = []
    scores = []
    for lo in range(0, len(data), batch_size):
        samples = [eval_sample(img, out_side) for img in data.images[lo:lo + batch_size]]
        batch = _assemble_batch(model, samples)
        logits = model.forward(batch, mode="eval")
        probs = softmax(logits)
        preds.append(probs.argmax(axis=1))
        scores.append(probs)
    return np.concatenate(preds), np.vstack(scores)
