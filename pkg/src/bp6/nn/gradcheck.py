"""Central finite-difference check of tape gradients."""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .tensor import Tape, Tensor

REL_FLOOR = 1e-8


def relative_error(g_ad: float, g_fd: float) -> float:
    return abs(g_ad - g_fd) / max(abs(g_ad), abs(g_fd), REL_FLOOR)


def analytic_gradients(f: Callable[[], Tensor], params: Sequence[Tensor]) -> list[np.ndarray]:
    for p in params:
        p.grad = None
    with Tape() as tape:
        loss = f()
    tape.backward(loss)
    return [np.zeros_like(p.data) if p.grad is None else p.grad.copy() for p in params]


def grad_check_report(f: Callable[[], Tensor], params: Sequence[Tensor], n_coords: int | None = None,
                      rng: np.random.Generator | None = None, step: float = 1e-5) -> list[tuple]:
    """Per-coordinate rows ``(param_index, local_index, g_ad, g_fd, rel_error)``.

    ``f`` must be deterministic and read the current values of ``params``.
    With ``n_coords`` set, that many coordinates are sampled uniformly over
    all parameter entries; otherwise every coordinate is checked.
    The step is ``step * max(1, |theta|)``.
    """
    grads = analytic_gradients(f, params)
    sizes = np.array([p.data.size for p in params])
    total = int(sizes.sum())
    if n_coords is None or n_coords >= total:
        flat = np.arange(total)
    else:
        rng = rng or np.random.default_rng(0)
        flat = np.sort(rng.choice(total, size=n_coords, replace=False))
    offsets = np.concatenate([[0], np.cumsum(sizes)])

    rows = []
    for idx in flat:
        which = int(np.searchsorted(offsets, idx, side="right") - 1)
        p = params[which]
        local = np.unravel_index(idx - offsets[which], p.shape)
        theta = p.data[local]
        h = step * max(1.0, abs(theta))
        p.data[local] = theta + h
        up = f().item()
        p.data[local] = theta - h
        down = f().item()
        p.data[local] = theta
        g_fd = (up - down) / (2.0 * h)
        g_ad = float(grads[which][local])
        rows.append((which, local, g_ad, g_fd, relative_error(g_ad, g_fd)))
    return rows


def grad_check(f: Callable[[], Tensor], params: Sequence[Tensor], n_coords: int | None = None,
               rng: np.random.Generator | None = None, step: float = 1e-5) -> float:
    """Max relative error between tape and central finite-difference gradients."""
    rows = grad_check_report(f, params, n_coords, rng, step)
    return max((r[4] for r in rows), default=0.0)
