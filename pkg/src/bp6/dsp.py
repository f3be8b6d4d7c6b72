"""IIR low-pass design and application, decimation, standardization."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.signal import lfilter

from .errors import DataError, InvalidArgumentError

MAX_ORDER = 8
FLAT_STD = 1e-8


@dataclass(frozen=True)
class IirCoefficients:
    b: np.ndarray
    a: np.ndarray
    order: int
    cutoff_hz: float
    fs_hz: float
    kind: str = "lowpass"

    def response(self, freqs_hz) -> np.ndarray:
        """Complex frequency response H(e^{jw}) at the given frequencies."""
        z = np.exp(-2j * np.pi * np.asarray(freqs_hz, dtype=float) / self.fs_hz)
        # polyval wants highest power first; coefficients are ordered by delay
        num = np.polyval(self.b[::-1], z)
        den = np.polyval(self.a[::-1], z)
        return num / den

    def gain(self, freqs_hz) -> np.ndarray:
        return np.abs(self.response(freqs_hz))


@dataclass(frozen=True)
class Segment:
    values: np.ndarray
    fs_hz: float
    channel_name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))

    def __len__(self):
        return len(self.values)

    def with_values(self, values, fs_hz=None) -> "Segment":
        return replace(self, values=values, fs_hz=self.fs_hz if fs_hz is None else fs_hz)


def design_butterworth_lowpass(order: int, cutoff_hz: float, fs_hz: float) -> IirCoefficients:
    """Digital Butterworth low-pass via the prewarped bilinear transform.

    The analog prototype is placed at the prewarped frequency
    ``2 fs tan(pi fc / fs)`` so the digital -3 dB point lands exactly on
    ``cutoff_hz``. The numerator is scaled for unity gain at DC.
    """
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_ORDER:
        raise InvalidArgumentError(f"filter order must be an integer in 1..{MAX_ORDER}, got {order!r}")
    if fs_hz <= 0:
        raise InvalidArgumentError(f"sampling rate must be positive, got {fs_hz}")
    if not 0 < cutoff_hz < fs_hz / 2:
        raise InvalidArgumentError(
            f"cutoff {cutoff_hz} Hz must lie strictly between 0 and Nyquist ({fs_hz / 2} Hz)"
        )
    warped = 2.0 * fs_hz * np.tan(np.pi * cutoff_hz / fs_hz)
    k = np.arange(1, order + 1)
    poles_s = warped * np.exp(1j * np.pi * (2 * k + order - 1) / (2 * order))
    poles_z = (1 + poles_s / (2 * fs_hz)) / (1 - poles_s / (2 * fs_hz))

    a = np.real(np.poly(poles_z))
    b = np.real(np.poly(-np.ones(order)))
    b = b * (a.sum() / b.sum())
    return IirCoefficients(b=b, a=a / a[0], order=int(order), cutoff_hz=float(cutoff_hz), fs_hz=float(fs_hz))


def _check_finite(x: np.ndarray, channel: str):
    if not np.all(np.isfinite(x)):
        bad = int(np.flatnonzero(~np.isfinite(x))[0])
        raise DataError(f"channel {channel or '<unnamed>'!r}: non-finite sample at index {bad}")


def filter_array(coeffs: IirCoefficients, x: np.ndarray, zero_phase: bool = True, channel: str = "") -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    _check_finite(x, channel)
    if not zero_phase:
        return lfilter(coeffs.b, coeffs.a, x)

    n = len(x)
    if n < 3 * coeffs.order:
        raise InvalidArgumentError(
            f"channel {channel or '<unnamed>'!r}: zero-phase filtering needs at least "
            f"{3 * coeffs.order} samples, got {n}"
        )
    pad = min(3 * coeffs.order, n - 1)
    # odd reflection about the edge samples
    head = 2 * x[0] - x[pad:0:-1]
    tail = 2 * x[-1] - x[-2:-pad - 2:-1]
    ext = np.concatenate([head, x, tail])
    y = lfilter(coeffs.b, coeffs.a, ext)
    y = lfilter(coeffs.b, coeffs.a, y[::-1])[::-1]
    return y[pad:pad + n].copy()


def apply_filter(coeffs: IirCoefficients, x: Segment, zero_phase: bool = True) -> Segment:
    """Filter a segment.

    Zero-phase mode runs the filter forward then backward over a signal
    extended by ``3 * order`` odd-reflected samples on each side; causal
    mode is a single forward pass from zero state.
    """
    return x.with_values(filter_array(coeffs, x.values, zero_phase, x.channel_name))


def decimate(x: Segment, factor: int) -> Segment:
    """Keep every ``factor``-th sample. Anti-aliasing is the caller's job."""
    if not isinstance(factor, (int, np.integer)) or factor <= 0:
        raise InvalidArgumentError(f"decimation factor must be a positive integer, got {factor!r}")
    n_out = len(x) // factor
    return x.with_values(x.values[: n_out * factor : factor].copy(), fs_hz=x.fs_hz / factor)


def standardize_array(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    mu = x.mean()
    sd = x.std()
    if sd < FLAT_STD:
        return np.zeros_like(x)
    return (x - mu) / sd


def standardize_segment(x: Segment) -> Segment:
    """Zero mean, unit population SD; flat segments map to zeros."""
    if len(x) < 2:
        raise InvalidArgumentError("standardization needs at least 2 samples")
    return x.with_values(standardize_array(x.values))
