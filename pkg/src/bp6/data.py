"""Recording ingestion, windowing, preprocessing, labeling, splitting and a synthetic generator."""

from __future__ import annotations

import csv
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .denoise import DenoiseConfig, denoise_ecg_array, denoise_ppg_array
from .dsp import design_butterworth_lowpass, filter_array, standardize_array
from .errors import (Bp6Error, DataError, InvalidArgumentError, ParseError,
                     PlausibilityError, SchemaError)

log = logging.getLogger(__name__)

CHANNELS = (
    "ecg",
    "pleth_1", "pleth_2", "pleth_3", "pleth_4", "pleth_5", "pleth_6",
    "lc_1", "lc_2",
    "temp_1", "temp_2", "temp_3",
    "a_x", "a_y", "a_z",
    "g_x", "g_y", "g_z",
)
# columns tolerated in recordings and dropped at ingestion
DROPPED_COLUMNS = ("peaks", "time")
BLOCK_NAMES = ("e", "p", "l", "t", "a", "g")
BLOCK_SIZES = (1, 6, 2, 3, 3, 3)
BLOCK_SLICES = tuple(slice(a, a + n) for a, n in zip(np.cumsum((0,) + BLOCK_SIZES[:-1]), BLOCK_SIZES))
MOTION_STATES = ("run", "walk", "sit")

RAW_FS_HZ = 500.0
WINDOW = 5000
DECIMATION = 5
SEGMENT = WINDOW // DECIMATION


@dataclass(frozen=True)
class PipelineConfig:
    raw_fs_hz: float = RAW_FS_HZ
    window: int = WINDOW
    decimation: int = DECIMATION
    antialias_cutoff_hz: float = 50.0
    antialias_order: int = 4
    denoise: DenoiseConfig = field(default_factory=DenoiseConfig)
    dia_min: float = 40.0
    sys_max: float = 250.0


@dataclass
class Recording:
    subject_id: str
    motion_state: str
    data: np.ndarray  # (18, n) in CHANNELS order

    @property
    def length(self) -> int:
        return self.data.shape[1]

    def channel(self, name: str) -> np.ndarray:
        return self.data[CHANNELS.index(name)]


@dataclass
class SixModalSample:
    blocks: tuple[np.ndarray, ...]  # six (C, 1000) float32 arrays, order e, p, l, t, a, g
    label: tuple[float, float] | None = None  # (SBP, DBP) mmHg
    subject_id: str = ""
    motion_state: str = ""
    window_index: int = 0

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.subject_id, self.motion_state, self.window_index)

    def with_label(self, sbp: float, dbp: float) -> "SixModalSample":
        return SixModalSample(self.blocks, (float(sbp), float(dbp)), self.subject_id, self.motion_state, self.window_index)


@dataclass
class DatasetSplit:
    train: list[SixModalSample]
    validation: list[SixModalSample]
    test: list[SixModalSample]
    seed: int

    def counts(self) -> dict[str, int]:
        return {"train": len(self.train), "validation": len(self.validation), "test": len(self.test)}


# ingestion -------------------------------------------------------------------

_NAME_RE = re.compile(r"(?P<subject>[^_\W]+)_(?P<state>[a-z]+)$")


def parse_recording_name(path) -> tuple[str, str]:
    """``s1_run.csv`` -> (``s1``, ``run``)."""
    m = _NAME_RE.match(Path(path).stem)
    if not m:
        raise SchemaError(f"cannot read subject and motion state from file name {Path(path).name!r} (expected e.g. s1_run.csv)")
    return m.group("subject"), m.group("state")


def ingest_recording(path, subject_id: str | None = None, motion_state: str | None = None) -> Recording:
    """Read one comma-delimited recording with a header naming the channels."""
    path = Path(path)
    if subject_id is None or motion_state is None:
        s, m = parse_recording_name(path)
        subject_id = subject_id or s
        motion_state = motion_state or m
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        missing = [c for c in CHANNELS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing channel(s) {', '.join(missing)}")
        extra = [h for h in header if h not in CHANNELS and h not in DROPPED_COLUMNS]
        if extra:
            log.warning("%s: ignoring unknown columns %s", path, extra)
        cols = [header.index(c) for c in CHANNELS]
        width = len(header)
        rows: list[list[float]] = []
        short: dict[str, int] = {}
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != width:
                raise ParseError(f"{path}:{line_no}: expected {width} fields, found {len(row)}")
            values = []
            for name, c in zip(CHANNELS, cols):
                cell = row[c].strip()
                if cell == "":
                    short.setdefault(name, line_no)
                    values.append(math.nan)
                    continue
                if name in short:
                    raise ParseError(f"{path}:{line_no}: channel {name} resumes after a gap at line {short[name]}")
                try:
                    values.append(float(cell))
                except ValueError:
                    raise ParseError(f"{path}:{line_no}: channel {name} has non-numeric value {cell!r}") from None
            rows.append(values)
    data = np.asarray(rows, dtype=np.float64).T.reshape(len(CHANNELS), -1)
    if short:
        n = data.shape[1]
        details = ", ".join(f"{name} has {short[name] - 2} samples" for name in short)
        raise SchemaError(f"{path}: channel length mismatch ({details}; expected {n})")
    bad = ~np.all(np.isfinite(data), axis=0)
    if np.any(bad):
        first = int(np.argmax(bad))
        raise DataError(f"{path}: non-finite value in data row {first} (line {first + 2})")
    return Recording(subject_id, motion_state, data)


def window_recording(rec: Recording, window: int = WINDOW) -> list[np.ndarray]:
    """Non-overlapping ``(18, window)`` windows; the trailing remainder is dropped."""
    count = rec.length // window
    if count == 0:
        log.warning("%s/%s: %d samples is shorter than one window of %d", rec.subject_id, rec.motion_state, rec.length, window)
    return [rec.data[:, i * window : (i + 1) * window] for i in range(count)]


# preprocessing ---------------------------------------------------------------

def preprocess_window(window: np.ndarray, cfg: PipelineConfig = PipelineConfig(), subject_id: str = "",
                      motion_state: str = "", window_index: int = 0) -> SixModalSample:
    """Anti-alias, decimate and standardize every channel, denoise ECG and PPG, group into blocks."""
    window = np.asarray(window, dtype=np.float64)
    if window.shape != (len(CHANNELS), cfg.window):
        raise InvalidArgumentError(f"window must be {(len(CHANNELS), cfg.window)}, got {window.shape}")
    fs = cfg.raw_fs_hz / cfg.decimation
    lp = design_butterworth_lowpass(cfg.antialias_order, cfg.antialias_cutoff_hz, cfg.raw_fs_hz)
    out = np.empty((len(CHANNELS), cfg.window // cfg.decimation))
    try:
        for i, name in enumerate(CHANNELS):
            y = filter_array(lp, window[i], zero_phase=True, channel=name)[:: cfg.decimation]
            y = standardize_array(y)
            if name == "ecg":
                y = denoise_ecg_array(y, fs, cfg.denoise, name)
            elif name.startswith("pleth"):
                y = denoise_ppg_array(y, fs, cfg.denoise, name)
            out[i] = y
    except Bp6Error as e:
        raise type(e)(f"{subject_id}/{motion_state} window {window_index}: {e}") from e
    blocks = tuple(out[s].astype(np.float32) for s in BLOCK_SLICES)
    return SixModalSample(blocks, None, subject_id, motion_state, window_index)


def preprocess_recording(rec: Recording, cfg: PipelineConfig = PipelineConfig(), workers: int = 1) -> list[SixModalSample]:
    windows = window_recording(rec, cfg.window)
    args = [(w, cfg, rec.subject_id, rec.motion_state, i) for i, w in enumerate(windows)]
    if workers > 1 and len(args) > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(_preprocess_args, args))
    return [_preprocess_args(a) for a in args]


def _preprocess_args(a):
    return preprocess_window(*a)


# labels and splits -----------------------------------------------------------

def check_plausible(sbp: float, dbp: float, dia_min: float = 40.0, sys_max: float = 250.0, where: str = ""):
    if not (math.isfinite(sbp) and math.isfinite(dbp) and dia_min <= dbp < sbp <= sys_max):
        raise PlausibilityError(f"{where}implausible BP label sys={sbp}, dia={dbp} (need {dia_min} <= dia < sys <= {sys_max})")


def load_annotations(path, dia_min: float = 40.0, sys_max: float = 250.0) -> dict[tuple[str, str], tuple[float, float]]:
    """Map (subject_id, motion_state) -> (bp_sys_end, bp_dia_end)."""
    path = Path(path)
    need = ("subject_id", "motion_state", "bp_sys_end", "bp_dia_end")
    with path.open(newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ParseError(f"{path}: empty annotation file")
        fields = [f.strip() for f in reader.fieldnames]
        missing = [c for c in need if c not in fields]
        if missing:
            raise SchemaError(f"{path}: annotation file lacks column(s) {', '.join(missing)}")
        reader.fieldnames = fields
        out = {}
        for line_no, row in enumerate(reader, start=2):
            try:
                sbp, dbp = float(row["bp_sys_end"]), float(row["bp_dia_end"])
            except (TypeError, ValueError):
                raise ParseError(f"{path}:{line_no}: unreadable BP values") from None
            key = (row["subject_id"].strip(), row["motion_state"].strip())
            check_plausible(sbp, dbp, dia_min, sys_max, where=f"{path}:{line_no}: ")
            out[key] = (sbp, dbp)
    return out


def assign_labels(samples, annotations, dia_min: float = 40.0, sys_max: float = 250.0) -> list[SixModalSample]:
    """Give every window its recording's end-of-recording (SBP, DBP)."""
    unmatched = sorted({(s.subject_id, s.motion_state) for s in samples} - set(annotations))
    if unmatched:
        raise SchemaError("no annotation for " + ", ".join(f"{a}/{b}" for a, b in unmatched))
    out = []
    for s in samples:
        sbp, dbp = annotations[(s.subject_id, s.motion_state)]
        check_plausible(sbp, dbp, dia_min, sys_max, where=f"{s.subject_id}/{s.motion_state}: ")
        out.append(s.with_label(sbp, dbp))
    return out


def split_counts(n: int) -> tuple[int, int, int]:
    n_train = (7 * n) // 10
    n_val = n // 10
    return n_train, n_val, n - n_train - n_val


def split_dataset(samples, seed: int, by_subject: bool = False) -> DatasetSplit:
    """Seeded 7:1:2 partition (floor for train and validation, remainder to test).

    ``by_subject`` cuts the shuffled subject list instead, so no subject
    appears in two parts.
    """
    samples = list(samples)
    if len(samples) < 10:
        raise InvalidArgumentError(f"need at least 10 samples to split, got {len(samples)}")
    rng = np.random.default_rng(seed)
    if by_subject:
        subjects = sorted({s.subject_id for s in samples})
        if len(subjects) < 3:
            raise InvalidArgumentError("subject-wise split needs at least 3 subjects")
        order = [subjects[i] for i in rng.permutation(len(subjects))]
        a, b, _ = split_counts(len(subjects))
        a, b = max(a, 1), max(b, 1)
        part = {s: 0 for s in order[:a]} | {s: 1 for s in order[a : a + b]} | {s: 2 for s in order[a + b :]}
        groups = [[], [], []]
        for s in samples:
            groups[part[s.subject_id]].append(s)
        return DatasetSplit(*groups, seed=seed)
    perm = rng.permutation(len(samples))
    a, b, _ = split_counts(len(samples))
    shuffled = [samples[i] for i in perm]
    return DatasetSplit(shuffled[:a], shuffled[a : a + b], shuffled[a + b :], seed=seed)


def stack_samples(samples) -> tuple[list[np.ndarray], np.ndarray]:
    """Batch arrays: six ``(N, C, L)`` float64 blocks and ``(N, 2)`` labels (NaN if unlabeled)."""
    samples = list(samples)
    if not samples:
        raise InvalidArgumentError("no samples to stack")
    blocks = [np.stack([s.blocks[b] for s in samples]).astype(np.float64) for b in range(len(BLOCK_SIZES))]
    labels = np.array([s.label if s.label is not None else (np.nan, np.nan) for s in samples], dtype=np.float64)
    return blocks, labels


# synthetic data --------------------------------------------------------------

SYNTH_SBP = (90.0, 140.0)
SYNTH_DBP = (60.0, 90.0)
SYNTH_FS_HZ = 100.0


@dataclass(frozen=True)
class SynthParams:
    sbp: float
    dbp: float
    heart_rate_hz: float
    delay_s: float       # ECG R peak to proximal PPG pulse
    distal_lag_s: float  # proximal to distal PPG pulse
    amplitude: float     # pulse amplitude relative to the unit respiratory baseline


def synth_delay(sbp: float) -> float:
    return 0.30 - 0.002 * (sbp - SYNTH_SBP[0])


def synth_distal_lag(sbp: float) -> float:
    return 0.04 + 0.001 * (SYNTH_SBP[1] - sbp)


def synth_amplitude(dbp: float) -> float:
    return 0.5 + 0.03 * (dbp - SYNTH_DBP[0])


def _bump_train(t: np.ndarray, beats: np.ndarray, width: float) -> np.ndarray:
    return np.exp(-0.5 * ((t[:, None] - beats[None, :]) / width) ** 2).sum(axis=1)


def _band_noise(rng, n: int, cutoff_hz: float, fs: float) -> np.ndarray:
    lp = design_butterworth_lowpass(2, cutoff_hz, fs)
    return filter_array(lp, rng.standard_normal(n + 200), zero_phase=True)[100:-100]


def synth_generate(n: int, seed: int, length: int = SEGMENT) -> tuple[list[SixModalSample], list[SynthParams]]:
    """Seeded synthetic samples whose PPG timing and amplitude encode the label.

    ECG is a Gaussian QRS train at 1-2 Hz. Each PPG channel is the beat train
    delayed (SBP-dependent, distal channels later) and widened, scaled
    (DBP-dependent) on top of a unit respiratory sinusoid. Other blocks are
    band-limited noise. Every channel is standardized.
    """
    if n < 1:
        raise InvalidArgumentError("n must be >= 1")
    rng = np.random.default_rng(seed)
    t = np.arange(length) / SYNTH_FS_HZ
    samples, params = [], []
    for i in range(n):
        sbp = rng.uniform(*SYNTH_SBP)
        dbp = rng.uniform(SYNTH_DBP[0], min(SYNTH_DBP[1], sbp - 1.0))
        hr = rng.uniform(1.0, 2.0)
        phase = rng.uniform(0.0, 1.0 / hr)
        beats = phase + np.arange(-2, int(t[-1] * hr) + 3) / hr
        delay, lag, amp = synth_delay(sbp), synth_distal_lag(sbp), synth_amplitude(dbp)
        ecg = _bump_train(t, beats, 0.04) + 0.05 * rng.standard_normal(length)
        resp_f, resp_phase = rng.uniform(0.2, 0.35), rng.uniform(0, 2 * np.pi)
        ppg = []
        for c in range(6):
            d = delay + (lag if c >= 3 else 0.0)
            pulse = _bump_train(t, beats + d, 0.08)
            base = np.sin(2 * np.pi * resp_f * t + resp_phase + 0.1 * c)
            ppg.append(amp * pulse + base + 0.02 * rng.standard_normal(length))
        other = [
            [_band_noise(rng, length, 1.0, SYNTH_FS_HZ) for _ in range(2)],
            [_band_noise(rng, length, 0.3, SYNTH_FS_HZ) for _ in range(3)],
            [_band_noise(rng, length, 5.0, SYNTH_FS_HZ) for _ in range(3)],
            [_band_noise(rng, length, 5.0, SYNTH_FS_HZ) for _ in range(3)],
        ]
        rows = [[ecg], ppg, *other]
        blocks = tuple(np.stack([standardize_array(r) for r in rs]).astype(np.float32) for rs in rows)
        samples.append(SixModalSample(blocks, (float(sbp), float(dbp)), f"syn{i // 8}", MOTION_STATES[i % 3], i))
        params.append(SynthParams(float(sbp), float(dbp), float(hr), delay, lag, amp))
    return samples, params
