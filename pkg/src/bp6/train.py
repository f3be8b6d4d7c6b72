"""Deterministic mini-batch training with best-validation checkpointing."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidArgumentError, TrainingAborted
from .losses import LossConfig, total_loss
from .model import SixModalModel
from .nn.checkpoint import save_checkpoint
from .nn.tensor import Tape
from .optim import Adam, AdamConfig

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "train_mse", "train_contrastive", "train_total", "val_mae_sbp", "val_mae_dbp")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 24
    learning_rate: float = 3e-4
    epochs: int = 100
    seed: int = 0
    adam: AdamConfig = field(default_factory=AdamConfig)
    # start every expert's output bias at the training-label mean
    init_output_bias: bool = True

    def optimizer_config(self) -> AdamConfig:
        return AdamConfig(lr=self.learning_rate, beta1=self.adam.beta1, beta2=self.adam.beta2, eps=self.adam.eps)


@dataclass
class FitResult:
    metrics: list[dict]
    best_epoch: int
    best_val_mae: float
    best_state: dict[str, np.ndarray]


def predict(model: SixModalModel, blocks, batch_size: int = 64) -> np.ndarray:
    """Eval-mode predictions ``(N, 2)``; no tape is recorded."""
    was_training = model.training
    model.eval()
    n = blocks[0].shape[0]
    out = np.empty((n, 2))
    for start in range(0, n, batch_size):
        sl = slice(start, start + batch_size)
        pred, _ = model([b[sl] for b in blocks])
        out[sl] = pred.data
    model.train(was_training)
    return out


def _batches(n: int, batch_size: int, min_batch: int, rng: np.random.Generator):
    perm = rng.permutation(n)
    for start in range(0, n, batch_size):
        idx = perm[start : start + batch_size]
        if len(idx) >= min_batch:
            yield idx


def fit(model: SixModalModel, train, val, train_cfg: TrainConfig = TrainConfig(),
        loss_cfg: LossConfig = LossConfig(), metrics_path=None, checkpoint_path=None,
        checkpoint_meta: dict | None = None, on_epoch=None) -> FitResult:
    """Train ``model`` in place; on return it holds the best-validation weights.

    ``train`` and ``val`` are ``(blocks, labels)`` pairs as produced by
    :func:`bp6.data.stack_samples`. One generator seeded from
    ``train_cfg.seed`` drives shuffling, dropout and negative sampling.
    A trailing batch too small for the negatives (or for batch norm) is skipped.
    ``on_epoch(row)`` is called after each epoch; a true return stops training.
    """
    train_blocks, y_train = train
    val_blocks, y_val = val
    n = len(y_train)
    if len(y_val) == 0:
        raise InvalidArgumentError("validation set is empty")
    if train_cfg.batch_size < loss_cfg.k_negatives + 1 and loss_cfg.lambda_contrastive > 0:
        raise ConfigError(f"batch_size {train_cfg.batch_size} < k_negatives + 1 = {loss_cfg.k_negatives + 1}")
    min_batch = max(2, loss_cfg.k_negatives + 1 if loss_cfg.lambda_contrastive > 0 else 2)
    if n < min_batch:
        raise InvalidArgumentError(f"training set of {n} is smaller than the minimum batch {min_batch}")

    rng = np.random.default_rng(train_cfg.seed)
    model.set_rng(rng)
    if train_cfg.init_output_bias:
        model.head.set_output_bias(y_train.mean(axis=0))
    opt = Adam(model.parameters(), train_cfg.optimizer_config())
    log.info("fit: %d train / %d val, lambda_contrastive=%g tau=%g K=%d, lr=%g, seed=%d", n, len(y_val),
             loss_cfg.lambda_contrastive, loss_cfg.tau, loss_cfg.k_negatives, train_cfg.learning_rate, train_cfg.seed)

    metrics: list[dict] = []
    best = (math.inf, 0, None)
    writer = fh = None
    if metrics_path is not None:
        fh = open(metrics_path, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(METRIC_COLUMNS)
    try:
        for epoch in range(1, train_cfg.epochs + 1):
            model.train()
            sums = np.zeros(3)
            seen = 0
            for b, idx in enumerate(_batches(n, train_cfg.batch_size, min_batch, rng)):
                xb = [blk[idx] for blk in train_blocks]
                yb = y_train[idx]
                opt.zero_grad()
                with Tape() as tape:
                    pred, emb = model(xb)
                    tot, mse, con = total_loss(pred, yb, emb, loss_cfg, rng)
                values = (mse.item(), con.item(), tot.item())
                if not all(math.isfinite(v) for v in values):
                    raise TrainingAborted(
                        f"non-finite loss at epoch {epoch}, batch {b}",
                        diagnostics={"epoch": epoch, "batch": b, "mse": values[0],
                                     "contrastive": values[1], "total": values[2]},
                    )
                tape.backward(tot)
                opt.step()
                sums += np.array(values) * len(idx)
                seen += len(idx)
            means = sums / max(seen, 1)
            val_pred = predict(model, val_blocks)
            mae = np.abs(val_pred - y_val).mean(axis=0)
            if not np.all(np.isfinite(mae)):
                raise TrainingAborted(
                    f"non-finite validation MAE at epoch {epoch}",
                    diagnostics={"epoch": epoch, "batch": None, "mse": float(means[0]),
                                 "contrastive": float(means[1]), "total": float(means[2]),
                                 "val_mae_sbp": float(mae[0]), "val_mae_dbp": float(mae[1])},
                )
            row = {"epoch": epoch, "train_mse": means[0], "train_contrastive": means[1],
                   "train_total": means[2], "val_mae_sbp": mae[0], "val_mae_dbp": mae[1]}
            metrics.append(row)
            if writer is not None:
                writer.writerow([epoch] + [repr(float(row[k])) for k in METRIC_COLUMNS[1:]])
                fh.flush()
            score = float(mae.mean())
            if score < best[0]:
                state = {k: v.copy() for k, v in model.state_dict().items()}
                best = (score, epoch, state)
                if checkpoint_path is not None:
                    meta = dict(checkpoint_meta or {})
                    meta.update(epoch=epoch, val_mae_sbp=float(mae[0]), val_mae_dbp=float(mae[1]))
                    save_checkpoint(checkpoint_path, state, meta)
            log.info("epoch %d  mse %.4f  con %.4f  val MAE %.3f/%.3f", epoch, *means[:2], *mae)
            if on_epoch is not None and on_epoch(row):
                break
    finally:
        if fh is not None:
            fh.close()
    model.load_state_dict(best[2])
    model.eval()
    return FitResult(metrics, best[1], best[0], best[2])
