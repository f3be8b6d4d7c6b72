"""Regression, contrastive alignment and total losses."""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .moe import MODALITIES
from .nn import functional as F
from .nn.tensor import Tensor, as_tensor

# below this norm an embedding is treated as zero and its similarity defined as 0
ZERO_NORM = 1e-12


@dataclass(frozen=True)
class LossConfig:
    lambda_contrastive: float = 0.3
    tau: float = 0.5
    k_negatives: int = 5

    def __post_init__(self):
        if self.tau <= 0:
            raise ConfigError("tau must be > 0")
        if self.k_negatives < 1:
            raise ConfigError("k_negatives must be >= 1")
        if self.lambda_contrastive < 0:
            raise ConfigError("lambda_contrastive must be >= 0")


PAIRS = tuple(itertools.combinations(range(len(MODALITIES)), 2))


class Diagnostics:
    """Counts degenerate events seen by the losses."""

    def __init__(self):
        self.zero_norm = 0

    def reset(self):
        self.zero_norm = 0


DIAGNOSTICS = Diagnostics()


def mse_loss(pred, target) -> Tensor:
    """Batch mean of the squared Euclidean error of each (SBP, DBP) pair."""
    pred, target = as_tensor(pred), as_tensor(target)
    if pred.shape != target.shape or pred.ndim != 2:
        raise ShapeError(f"mse_loss: prediction {pred.shape} vs target {target.shape}")
    r = F.sub(pred, target)
    return F.scale(F.sum(F.mul(r, r)), 1.0 / pred.shape[0])


def cosine_sim(u, v, diagnostics: Diagnostics = DIAGNOSTICS) -> Tensor:
    """Cosine similarity over the last axis; 0 where either vector is (near) zero."""
    u, v = as_tensor(u), as_tensor(v)
    nu, nv = F.l2_norm(u), F.l2_norm(v)
    bad = (nu.data <= ZERO_NORM) | (np.broadcast_to(nv.data, np.broadcast_shapes(nu.shape, nv.shape)) <= ZERO_NORM)
    if np.any(bad):
        diagnostics.zero_norm += int(np.count_nonzero(bad))
        safe = np.where(bad, 1.0, 0.0)
        den = F.add(F.mul(F.mul(nu, nv), 1.0 - safe), safe)
        return F.mul(F.div(F.dot(u, v), den), 1.0 - safe)
    return F.div(F.dot(u, v), F.mul(nu, nv))


def sample_negatives(batch: int, k: int, rng: np.random.Generator) -> np.ndarray:
    """For each row i, ``k`` distinct indices from {0..batch-1} minus {i}."""
    if batch < k + 1:
        raise ConfigError(f"batch of {batch} is too small for {k} negatives (need >= {k + 1})")
    out = np.empty((batch, k), dtype=np.intp)
    for i in range(batch):
        j = rng.choice(batch - 1, size=k, replace=False)
        out[i] = j + (j >= i)
    return out


def pair_infonce(anchor, other, cfg: LossConfig = LossConfig(), rng: np.random.Generator | None = None,
                 negatives: np.ndarray | None = None) -> Tensor:
    """InfoNCE of row-aligned positives against ``K`` in-batch negatives.

    Negatives pair anchor ``i`` with ``other[j]`` for sampled ``j != i``.
    Pass ``negatives`` (``(B, K)`` indices) to fix them instead of sampling.
    """
    anchor, other = as_tensor(anchor), as_tensor(other)
    if anchor.shape != other.shape or anchor.ndim != 2:
        raise ShapeError(f"pair_infonce: anchor {anchor.shape} vs other {other.shape}")
    B = anchor.shape[0]
    if negatives is None:
        if rng is None:
            raise ConfigError("pair_infonce needs a random generator or fixed negatives")
        negatives = sample_negatives(B, cfg.k_negatives, rng)
    else:
        # fixed negatives may repeat indices (e.g. K=5 on a batch of 4) but never hit the positive
        negatives = np.asarray(negatives, dtype=np.intp)
        if negatives.shape != (B, cfg.k_negatives):
            raise ShapeError(f"pair_infonce: negatives {negatives.shape}, expected {(B, cfg.k_negatives)}")
        if np.any(negatives == np.arange(B)[:, None]) or negatives.min() < 0 or negatives.max() >= B:
            raise ConfigError("pair_infonce: fixed negatives must index other rows of the batch")
    inv_tau = 1.0 / cfg.tau
    d_pos = cosine_sim(anchor, other)                                           # (B,)
    d_neg = cosine_sim(F.reshape(anchor, (B, 1, anchor.shape[1])), F.take(other, negatives))  # (B, K)
    pos = F.scale(d_pos, inv_tau)
    denom = F.add(F.exp(pos), F.sum(F.exp(F.scale(d_neg, inv_tau)), axis=1))
    return F.mean(F.sub(F.log(denom), pos))


def contrastive_loss(embeddings, cfg: LossConfig = LossConfig(), rng: np.random.Generator | None = None,
                     negatives=None, return_pairs: bool = False):
    """Mean pairwise InfoNCE over the 15 unordered modality pairs.

    The anchor of each pair is its first modality in canonical order.
    ``negatives`` may be one ``(B, K)`` array shared by all pairs or a list
    of 15; otherwise each pair samples its own, in pair order.
    """
    if len(embeddings) != len(MODALITIES):
        raise ShapeError(f"contrastive_loss: expected {len(MODALITIES)} embedding batches")
    terms = []
    for n, (a, b) in enumerate(PAIRS):
        neg = negatives[n] if isinstance(negatives, (list, tuple)) else negatives
        terms.append(pair_infonce(embeddings[a], embeddings[b], cfg, rng, neg))
    total = terms[0]
    for t in terms[1:]:
        total = F.add(total, t)
    loss = F.scale(total, 1.0 / len(terms))
    return (loss, terms) if return_pairs else loss


def total_loss(pred, target, embeddings, cfg: LossConfig = LossConfig(), rng: np.random.Generator | None = None,
               negatives=None):
    """Returns ``(total, mse, contrastive)``; contrastive is skipped when lambda is 0."""
    mse = mse_loss(pred, target)
    if cfg.lambda_contrastive == 0:
        return mse, mse, Tensor(0.0)
    con = contrastive_loss(embeddings, cfg, rng, negatives)
    return F.add(mse, F.scale(con, cfg.lambda_contrastive)), mse, con
