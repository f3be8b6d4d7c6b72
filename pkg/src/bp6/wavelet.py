"""Periodized db4 discrete wavelet transform and universal soft shrinkage."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidArgumentError

# Daubechies, 4 vanishing moments (8 taps), analysis low-pass
DB4_LO = np.array([
    -0.010597401785069032,
    0.0328830116668852,
    0.030841381835560764,
    -0.18703481171909309,
    -0.027983769416859854,
    0.6308807679298589,
    0.7148465705529157,
    0.2303778133088965,
])
DB4_HI = np.array([(-1) ** (k + 1) * DB4_LO[len(DB4_LO) - 1 - k] for k in range(len(DB4_LO))])

MAD_SCALE = 0.6745
THRESHOLD_RULES = ("universal-soft", "level-soft")


@dataclass(frozen=True)
class WaveletConfig:
    basis: str = "db4"
    levels: int = 4
    threshold_rule: str = "universal-soft"
    boundary: str = "periodic"
    pad_mode: str = "zero"

    def __post_init__(self):
        if self.basis != "db4":
            raise InvalidArgumentError(f"only the db4 basis is supported, got {self.basis!r}")
        if self.levels < 1:
            raise InvalidArgumentError("wavelet levels must be >= 1")
        if self.threshold_rule not in THRESHOLD_RULES:
            raise InvalidArgumentError(f"unknown threshold rule {self.threshold_rule!r}")
        if self.boundary != "periodic":
            raise InvalidArgumentError(f"unknown boundary mode {self.boundary!r}")
        if self.pad_mode not in ("zero", "symmetric"):
            raise InvalidArgumentError(f"unknown pad mode {self.pad_mode!r}")


@dataclass
class Pyramid:
    """Approximation plus details ordered finest first (``details[0]`` is level 1)."""

    approx: np.ndarray
    details: list = field(default_factory=list)
    n_orig: int = 0

    @property
    def n_coeffs(self) -> int:
        return len(self.approx) + sum(len(d) for d in self.details)

    def energy(self) -> float:
        return float(np.sum(self.approx ** 2) + sum(np.sum(d ** 2) for d in self.details))


def _taps(n: int) -> np.ndarray:
    half = np.arange(n // 2)[:, None]
    k = np.arange(len(DB4_LO))[None, :]
    return (2 * half + len(DB4_LO) // 2 - k) % n


def _analysis(x):
    idx = _taps(len(x))
    seg = x[idx]
    return seg @ DB4_LO, seg @ DB4_HI


def _synthesis(approx, detail):
    n = 2 * len(approx)
    out = np.zeros(n)
    np.add.at(out, _taps(n), approx[:, None] * DB4_LO + detail[:, None] * DB4_HI)
    return out


def padded_length(n: int, levels: int) -> int:
    block = 2 ** levels
    return -(-n // block) * block


def dwt_db4(x, cfg: WaveletConfig = WaveletConfig()) -> Pyramid:
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    n = len(x)
    n_pad = padded_length(n, cfg.levels)
    if n < 2 ** cfg.levels:
        raise InvalidArgumentError(f"{cfg.levels} levels is too deep for a signal of length {n}")
    if n_pad > n:
        if cfg.pad_mode == "zero":
            x = np.concatenate([x, np.zeros(n_pad - n)])
        else:
            x = np.pad(x, (0, n_pad - n), mode="symmetric")

    details = []
    approx = x
    for _ in range(cfg.levels):
        approx, d = _analysis(approx)
        details.append(d)
    return Pyramid(approx=approx, details=details, n_orig=n)


def idwt_db4(pyramid: Pyramid, cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    if len(pyramid.details) != cfg.levels:
        raise InvalidArgumentError(
            f"pyramid has {len(pyramid.details)} detail levels, config expects {cfg.levels}"
        )
    approx = np.asarray(pyramid.approx, dtype=np.float64)
    for d in reversed(pyramid.details):
        approx = _synthesis(approx, np.asarray(d, dtype=np.float64))
    n = pyramid.n_orig or len(approx)
    return approx[:n]


def soft_threshold(d: np.ndarray, lam: float) -> np.ndarray:
    return np.sign(d) * np.maximum(np.abs(d) - lam, 0.0)


def mad_sigma(d: np.ndarray) -> float:
    return float(np.median(np.abs(d)) / MAD_SCALE) if len(d) else 0.0


def universal_threshold(d: np.ndarray, n: int | None = None) -> float:
    """``sigma * sqrt(2 ln n)`` with sigma the MAD estimate from ``d``."""
    n = len(d) if n is None else n
    if n < 2:
        return 0.0
    return mad_sigma(d) * float(np.sqrt(2.0 * np.log(n)))


def shrink_coefficients(pyramid: Pyramid, rule: str = "universal-soft") -> Pyramid:
    """Soft-threshold the detail bands; the approximation is left alone.

    ``universal-soft`` estimates the noise level once from the finest
    details and applies ``sigma * sqrt(2 ln N)`` (N = coefficient count)
    to every level. ``level-soft`` estimates sigma and N per level.
    """
    if rule == "universal-soft":
        lam = universal_threshold(pyramid.details[0], pyramid.n_coeffs) if pyramid.details else 0.0
        details = [soft_threshold(d, lam) for d in pyramid.details]
    elif rule == "level-soft":
        details = [soft_threshold(d, universal_threshold(d)) for d in pyramid.details]
    else:
        raise InvalidArgumentError(f"unknown threshold rule {rule!r}")
    return Pyramid(approx=pyramid.approx.copy(), details=details, n_orig=pyramid.n_orig)
