import sys
import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("bp6", deadline=None, max_examples=40)
settings.load_profile("bp6")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pulse_train(n=1000, fs=100.0, rate_hz=1.2, width_s=0.04):
    """Gaussian pulses at ``rate_hz``; band-limited well below 15 Hz."""
    t = np.arange(n) / fs
    centers = np.arange(0.3, n / fs, 1.0 / rate_hz)
    return np.sum(np.exp(-0.5 * ((t[:, None] - centers[None, :]) / width_s) ** 2), axis=1)


def standardized(x):
    return (x - x.mean()) / x.std()


def write_recording(path, n=5000, seed=0, peaks=True, drop=(), short=None):
    """Write a comma-delimited recording with every channel (plus ``peaks``)."""
    from bp6.data import CHANNELS

    rng = np.random.default_rng(seed)
    names = [c for c in CHANNELS if c not in drop] + (["peaks"] if peaks else [])
    t = np.arange(n) / 500.0
    data = {c: np.sin(2 * np.pi * (1.0 + 0.1 * i) * t) + 0.1 * rng.standard_normal(n) for i, c in enumerate(names)}
    lines = [",".join(names)]
    for k in range(n):
        row = []
        for c in names:
            row.append("" if short and c == short[0] and k >= short[1] else f"{data[c][k]:.6f}")
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


def write_annotations(path, rows):
    path.write_text("subject_id,motion_state,bp_sys_end,bp_dia_end\n" + "".join(f"{a},{b},{c},{d}\n" for a, b, c, d in rows))
    return path


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
