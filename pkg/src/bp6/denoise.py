"""ECG and PPG denoisers applied to standardized 100 Hz segments."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsp import Segment, design_butterworth_lowpass, filter_array
from .vmd import VmdConfig, vmd_decompose
from .wavelet import WaveletConfig, dwt_db4, idwt_db4, shrink_coefficients


@dataclass(frozen=True)
class DenoiseConfig:
    ecg_cutoff_hz: float = 40.0
    ecg_order: int = 4
    ppg_cutoff_hz: float = 7.0
    ppg_order: int = 2
    vmd: VmdConfig = field(default_factory=VmdConfig)
    wavelet: WaveletConfig = field(default_factory=WaveletConfig)


def shrink_mode(mode: np.ndarray, cfg: WaveletConfig = WaveletConfig()) -> np.ndarray:
    return idwt_db4(shrink_coefficients(dwt_db4(mode, cfg), cfg.threshold_rule), cfg)


def denoise_ecg_array(x: np.ndarray, fs_hz: float = 100.0, cfg: DenoiseConfig = DenoiseConfig(), channel: str = "ecg") -> np.ndarray:
    lp = design_butterworth_lowpass(cfg.ecg_order, cfg.ecg_cutoff_hz, fs_hz)
    y = filter_array(lp, x, zero_phase=True, channel=channel)
    modes = vmd_decompose(y, cfg.vmd).modes
    return np.sum([shrink_mode(m, cfg.wavelet) for m in modes], axis=0)


def denoise_ppg_array(x: np.ndarray, fs_hz: float = 100.0, cfg: DenoiseConfig = DenoiseConfig(), channel: str = "ppg") -> np.ndarray:
    lp = design_butterworth_lowpass(cfg.ppg_order, cfg.ppg_cutoff_hz, fs_hz)
    return filter_array(lp, x, zero_phase=True, channel=channel)


def denoise_ecg(x: Segment, cfg: DenoiseConfig = DenoiseConfig()) -> Segment:
    """40 Hz low-pass, VMD into K modes, wavelet-shrink each mode, sum."""
    return x.with_values(denoise_ecg_array(x.values, x.fs_hz, cfg, x.channel_name))


def denoise_ppg(x: Segment, cfg: DenoiseConfig = DenoiseConfig()) -> Segment:
    return x.with_values(denoise_ppg_array(x.values, x.fs_hz, cfg, x.channel_name))
