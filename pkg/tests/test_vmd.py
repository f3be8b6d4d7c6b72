import numpy as np
import pytest

from bp6.errors import InvalidArgumentError, NumericFailure
from bp6.vmd import VmdConfig, vmd_decompose

FS = 100.0
T = np.arange(1000) / FS


def _peak_hz(x):
    spec = np.abs(np.fft.rfft(x))
    return np.fft.rfftfreq(len(x), 1 / FS)[np.argmax(spec)]


class TestVmd:
    def test_zeros(self):
        res = vmd_decompose(np.zeros(1000), VmdConfig(k_modes=3))
        assert res.converged
        assert np.all(res.modes == 0)

    def test_single_tone(self):
        x = np.sin(2 * np.pi * 5 * T)
        res = vmd_decompose(x, VmdConfig(k_modes=1))
        assert np.linalg.norm(res.modes[0] - x) / np.linalg.norm(x) < 0.02
        assert abs(res.omega[0] * FS - _peak_hz(x)) < 0.5

    def test_two_tones(self):
        x = np.sin(2 * np.pi * 5 * T) + np.sin(2 * np.pi * 25 * T)
        res = vmd_decompose(x, VmdConfig(k_modes=2))
        np.testing.assert_allclose(res.omega * FS, [5.0, 25.0], atol=0.5)
        assert np.linalg.norm(res.modes.sum(0) - x) / np.linalg.norm(x) < 0.05
        spec = np.fft.rfft(x)
        freqs = np.fft.rfftfreq(1000, 1 / FS)
        for mode, f0 in zip(res.modes, (5.0, 25.0)):
            tone = np.fft.irfft(np.where(np.abs(freqs - f0) < 2, spec, 0), 1000)
            assert np.linalg.norm(mode - tone) / np.linalg.norm(tone) < 0.05

    def test_output_shape_and_order(self, rng):
        x = rng.normal(size=999)
        res = vmd_decompose(x, VmdConfig(k_modes=4, max_iter=50))
        assert res.modes.shape == (4, 999)
        assert np.all(np.diff(res.omega) >= 0)
        assert np.all((res.omega >= 0) & (res.omega <= 0.5))
        assert np.all(np.isfinite(res.modes))

    def test_max_iter_is_not_an_error(self, rng):
        res = vmd_decompose(rng.normal(size=200), VmdConfig(k_modes=3, max_iter=2))
        assert res.iterations == 2 and not res.converged

    def test_mirror_extension_option(self):
        x = np.sin(2 * np.pi * 5 * T)
        res = vmd_decompose(x, VmdConfig(k_modes=1, extension="mirror"))
        assert abs(res.omega[0] * FS - 5.0) < 0.5

    def test_non_finite(self):
        x = np.ones(100)
        x[3] = np.inf
        with pytest.raises(NumericFailure):
            vmd_decompose(x)

    @pytest.mark.parametrize("kw", [{"k_modes": 0}, {"alpha": 0}, {"tol": -1}, {"omega_init": "random"}])
    def test_bad_config(self, kw):
        with pytest.raises(InvalidArgumentError):
            VmdConfig(**kw)

    def test_deterministic(self, rng):
        x = rng.normal(size=500)
        a, b = vmd_decompose(x), vmd_decompose(x)
        np.testing.assert_array_equal(a.modes, b.modes)
