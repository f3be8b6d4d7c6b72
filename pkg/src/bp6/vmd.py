"""Variational mode decomposition (spectral-domain ADMM)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.signal import lfilter, lfiltic

from .errors import InvalidArgumentError, NumericFailure

AR_ORDER = 32
AR_RIDGE = 1e-3
# predicted extensions beyond this multiple of the signal range fall back to mirroring
AR_GUARD = 3.0


@dataclass(frozen=True)
class VmdConfig:
    k_modes: int = 6
    alpha: float = 2000.0
    tau_dual: float = 0.0
    tol: float = 1e-7
    max_iter: int = 500
    omega_init: str = "uniform"
    extension: str = "predict"

    def __post_init__(self):
        if self.k_modes < 1:
            raise InvalidArgumentError("k_modes must be >= 1")
        if self.alpha <= 0:
            raise InvalidArgumentError("alpha must be > 0")
        if self.tol <= 0:
            raise InvalidArgumentError("tol must be > 0")
        if self.max_iter < 1:
            raise InvalidArgumentError("max_iter must be >= 1")
        if self.omega_init not in ("zero", "uniform"):
            raise InvalidArgumentError(f"omega_init must be 'zero' or 'uniform', got {self.omega_init!r}")
        if self.extension not in ("predict", "mirror"):
            raise InvalidArgumentError(f"extension must be 'predict' or 'mirror', got {self.extension!r}")


@dataclass
class VmdResult:
    modes: np.ndarray  # (k_modes, n)
    omega: np.ndarray  # cycles/sample, ascending
    iterations: int
    converged: bool


def _ar_coefficients(g: np.ndarray, order: int) -> np.ndarray:
    """Least-squares forward predictor with roots pulled inside the unit circle."""
    X = sliding_window_view(g, order + 1)
    A, y = X[:, :-1][:, ::-1], X[:, -1]
    gram = A.T @ A
    ridge = AR_RIDGE * np.trace(gram) / order
    a = np.linalg.solve(gram + ridge * np.eye(order), A.T @ y)
    roots = np.roots(np.concatenate([[1.0], -a]))
    outside = np.abs(roots) > 1.0
    if np.any(outside):
        roots[outside] = 1.0 / np.conj(roots[outside])
        a = -np.real(np.poly(roots))[1:]
    return a


def _predict(g: np.ndarray, m: int, order: int) -> np.ndarray:
    a = _ar_coefficients(g, order)
    # x[n] = sum_i a[i] x[n-1-i]  ->  all-pole filter driven by its initial state
    zi = lfiltic([1.0], np.concatenate([[1.0], -a]), g[::-1][:order])
    out, _ = lfilter([1.0], np.concatenate([[1.0], -a]), np.zeros(m), zi=zi)
    return out


def _extend(f: np.ndarray, half: int, mode: str) -> np.ndarray:
    """Extend ``f`` by ``half`` samples on each side.

    ``predict`` continues the mean-removed waveform with a linear predictor
    in both directions, then fades it to the mean over the outer half so
    the periodic wrap is smooth. ``mirror`` is plain even reflection.
    """
    order = min(AR_ORDER, len(f) // 4)
    if mode == "mirror" or order < 2:
        return np.concatenate([f[:half][::-1], f, f[-half:][::-1]])
    c = f.mean()
    g = f - c
    if not np.any(g):
        return _extend(f, half, "mirror")
    tail = _predict(g, half, order)
    head = _predict(g[::-1], half, order)
    bound = AR_GUARD * np.abs(g).max()
    if not (np.all(np.abs(tail) <= bound) and np.all(np.abs(head) <= bound)):
        return _extend(f, half, "mirror")
    d = np.arange(1, half + 1)
    knee = half // 2
    w = np.where(d <= knee, 1.0, 0.5 * (1.0 + np.cos(np.pi * (d - knee) / max(half - knee, 1))))
    return np.concatenate([c + (head * w)[::-1], f, c + tail * w])


def vmd_decompose(x, cfg: VmdConfig = VmdConfig()) -> VmdResult:
    """Decompose ``x`` into ``cfg.k_modes`` band-limited modes.

    The signal is extended by half its length on each side, decomposed
    on the analytic (positive-frequency) half spectrum and truncated back. Modes come back sorted by center frequency.
    """
    f = np.asarray(getattr(x, "values", x), dtype=np.float64)
    n_in = len(f)
    if n_in < 2:
        raise InvalidArgumentError("VMD needs at least 2 samples")
    if not np.all(np.isfinite(f)):
        raise NumericFailure("VMD input contains non-finite samples")
    odd = n_in % 2 == 1
    if odd:
        f = np.append(f, f[-1])
    n = len(f)
    half = n // 2
    mirrored = _extend(f, half, cfg.extension)
    T = len(mirrored)

    freqs = np.arange(T) / T - 0.5  # cycles/sample, fftshifted grid
    pos = slice(T // 2, T)
    f_hat = np.fft.fftshift(np.fft.fft(mirrored))
    f_hat_plus = f_hat.copy()
    f_hat_plus[: T // 2] = 0

    K = cfg.k_modes
    if cfg.omega_init == "uniform":
        omega = 0.5 / K * np.arange(K)
    else:
        omega = np.zeros(K)

    u_hat = np.zeros((K, T), dtype=complex)
    lam = np.zeros(T, dtype=complex)
    two_alpha = 2.0 * cfg.alpha
    converged = False
    it = 0
    while it < cfg.max_iter:
        it += 1
        prev = u_hat.copy()
        total = u_hat.sum(axis=0)
        for k in range(K):
            # Gauss-Seidel: residual uses already-updated modes < k
            total = total - u_hat[k]
            u_hat[k] = (f_hat_plus - total - lam / 2) / (1.0 + two_alpha * (freqs - omega[k]) ** 2)
            total = total + u_hat[k]
            power = np.abs(u_hat[k, pos]) ** 2
            denom = power.sum()
            if denom > 0:
                omega[k] = np.dot(freqs[pos], power) / denom
        if cfg.tau_dual:
            lam = lam + cfg.tau_dual * (u_hat.sum(axis=0) - f_hat_plus)

        if not (np.all(np.isfinite(u_hat)) and np.all(np.isfinite(omega))):
            raise NumericFailure(f"VMD diverged (non-finite values at iteration {it})")

        diff = np.sum(np.abs(u_hat - prev) ** 2, axis=1)
        ref = np.sum(np.abs(prev) ** 2, axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            rel = np.where(diff == 0, 0.0, diff / np.where(ref > 0, ref, np.inf))
        # a mode that was zero and became nonzero has rel = 0 above; treat it as unconverged
        rel = np.where((ref == 0) & (diff > 0), np.inf, rel)
        if rel.max() < cfg.tol:
            converged = True
            break

    # rebuild Hermitian full spectrum from the positive half
    full = np.zeros((K, T), dtype=complex)
    full[:, pos] = u_hat[:, pos]
    full[:, 1 : T // 2] = np.conj(u_hat[:, T - 1 : T // 2 : -1])
    full[:, 0] = np.conj(full[:, -1])
    modes = np.real(np.fft.ifft(np.fft.ifftshift(full, axes=1), axis=1))
    modes = modes[:, half : half + n]
    if odd:
        modes = modes[:, :n_in]

    order = np.argsort(omega, kind="stable")
    return VmdResult(modes=modes[order], omega=omega[order].copy(), iterations=it, converged=converged)
