import math

import numpy as np
import pytest
from scipy.io import wavfile

from avsec.dsp import (
    DspConfig,
    decode_wav,
    log_mel,
    logmel_feature,
    mel_band_edges,
    mel_filterbank,
    power_spectrogram,
    resample,
    temporal_mean,
)
from avsec.errors import DataError

CFG = DspConfig()


# Independent slaney-scale oracle (scalar math, no shared code with avsec.dsp).
def _oracle_hz_to_mel(f):
    if f < 1000.0:
        return f / (200.0 / 3)
    return 15.0 + math.log(f / 1000.0) / (math.log(6.4) / 27.0)


def _oracle_mel_to_hz(m):
    if m < 15.0:
        return m * (200.0 / 3)
    return 1000.0 * math.exp((math.log(6.4) / 27.0) * (m - 15.0))


def _oracle_centers(cfg):
    lo = _oracle_hz_to_mel(cfg.f_min)
    hi = _oracle_hz_to_mel(cfg.target_sample_rate / 2)
    mels = np.linspace(lo, hi, cfg.n_mels + 2)
    return np.array([_oracle_mel_to_hz(m) for m in mels])[1:-1]


class TestDecodeWav:
    def test_zero_int16(self, tmp_path):
        path = tmp_path / "z.wav"
        wavfile.write(path, 22050, np.zeros(100, dtype=np.int16))
        signal, rate = decode_wav(path)
        assert rate == 22050
        assert np.all(signal == 0.0)

    def test_full_scale_int16(self, tmp_path):
        path = tmp_path / "f.wav"
        wavfile.write(path, 44100, np.full(50, 32767, dtype=np.int16))
        signal, _ = decode_wav(path)
        assert signal[0] == pytest.approx(32767 / 32768)

    def test_stereo_cancellation(self, tmp_path):
        path = tmp_path / "s.wav"
        x = (np.sin(np.linspace(0, 10, 200)) * 30000).astype(np.int16)
        wavfile.write(path, 22050, np.stack([x, -x], axis=1))
        signal, _ = decode_wav(path)
        assert signal.ndim == 1
        assert np.max(np.abs(signal)) <= 1 / 32768

    def test_float32_passthrough(self, tmp_path):
        path = tmp_path / "f32.wav"
        wavfile.write(path, 22050, np.array([0.5, -0.25], dtype=np.float32))
        signal, _ = decode_wav(path)
        assert signal[0] == pytest.approx(0.5)

    def test_not_a_wav(self, tmp_path):
        path = tmp_path / "x.wav"
        path.write_bytes(b"this is not audio")
        with pytest.raises(DataError, match="not a decodable WAV"):
            decode_wav(path)


class TestResample:
    def test_identity(self):
        x = np.random.default_rng(0).normal(size=1000)
        assert np.array_equal(resample(x, 22050, 22050), x)

    def test_length_contract(self):
        x = np.zeros(44100)
        assert len(resample(x, 44100, 22050)) == 22050
        assert len(resample(np.zeros(30000), 44100, 22050)) == round(30000 / 2)

    def test_sine_peak_preserved(self):
        # DFT-peak oracle: dominant bin still at 1 kHz after 44.1k -> 22.05k
        rate_in, rate_out, freq = 44100, 22050, 1000.0
        t = np.arange(rate_in) / rate_in
        x = np.sin(2 * np.pi * freq * t)
        y = resample(x, rate_in, rate_out)
        spectrum = np.abs(np.fft.rfft(y))
        peak_hz = np.argmax(spectrum) * rate_out / len(y)
        assert peak_hz == pytest.approx(freq, abs=rate_out / len(y) + 1e-9)

    def test_bad_rates(self):
        with pytest.raises(DataError):
            resample(np.zeros(10), 0, 22050)


class TestMelFilterbank:
    def test_edges_match_oracle(self):
        edges = mel_band_edges(CFG)
        centers = edges[1:-1]
        assert centers == pytest.approx(_oracle_centers(CFG), rel=1e-9)

    def test_shape(self):
        fb = mel_filterbank(CFG)
        assert fb.shape == (128, 1025)

    def test_rows_cover_spectrum(self):
        fb = mel_filterbank(CFG)
        assert np.all(fb.sum(axis=1) > 0)

    def test_htk_scale_supported(self):
        cfg = DspConfig(mel_scale="htk")
        fb = mel_filterbank(cfg)
        assert fb.shape == (128, 1025)

    def test_config_validation(self):
        with pytest.raises(DataError, match="power of two"):
            DspConfig(fft_size=1000)
        with pytest.raises(DataError, match="hop"):
            DspConfig(hop=4096)
        with pytest.raises(DataError, match="Nyquist"):
            DspConfig(f_max=20000.0)


class TestLogMel:
    def test_zero_signal_hits_floor(self):
        out = log_mel(np.zeros(2048), CFG)
        assert np.all(out == 10 * np.log10(1e-10))
        assert np.all(out == -100.0)

    def test_frame_count_contract(self):
        for n in (512, 2048, 5000):
            out = log_mel(np.zeros(n), CFG)
            assert out.shape == (128, 1 + n // CFG.hop)

    @pytest.mark.parametrize("freq", [250.0, 1000.0, 2000.0, 8000.0])
    def test_sine_peaks_at_nearest_band(self, freq):
        t = np.arange(22050) / 22050
        x = np.sin(2 * np.pi * freq * t)
        out = log_mel(x, CFG)
        band = int(np.argmax(out.mean(axis=1)))
        centers = _oracle_centers(CFG)
        assert band == int(np.argmin(np.abs(centers - freq)))

    def test_noise_mel_energy_bounded(self):
        # slaney normalization keeps total band energy below spectrogram energy
        rng = np.random.default_rng(7)
        x = rng.normal(size=22050)
        spec = power_spectrogram(x, CFG)
        mel = mel_filterbank(CFG) @ spec
        assert mel.sum() <= spec.sum()

    def test_gain_shifts_db_uniformly(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=4096) * 0.1
        gain = 4.0
        base = log_mel(x, CFG)
        scaled = log_mel(gain * x, CFG)
        expected_shift = 20 * np.log10(gain) * (CFG.power / 2)
        above_floor = base > -99.0
        assert scaled[above_floor] - base[above_floor] == pytest.approx(
            expected_shift, abs=1e-6
        )
        assert scaled.shape == base.shape

    def test_db_ref_max(self):
        cfg = DspConfig(db_ref="max")
        x = np.sin(np.linspace(0, 400, 4096))
        out = log_mel(x, cfg)
        assert out.max() == pytest.approx(0.0)

    def test_empty_signal_rejected(self):
        with pytest.raises(DataError):
            log_mel(np.array([]), CFG)


class TestTemporalMean:
    def test_single_frame(self):
        m = np.array([[1.0], [2.0]])
        assert temporal_mean(m) == pytest.approx([1.0, 2.0])

    def test_two_frames(self):
        m = np.array([[1.0, 3.0], [2.0, 6.0]])
        assert temporal_mean(m) == pytest.approx([2.0, 4.0])

    def test_constant_matrix(self):
        m = np.full((4, 9), 5.5)
        assert temporal_mean(m) == pytest.approx([5.5] * 4)

    def test_zero_frames_rejected(self):
        with pytest.raises(DataError):
            temporal_mean(np.empty((4, 0)))


def test_logmel_feature_resamples_and_pools(tmp_path):
    t = np.arange(44100) / 44100
    x = 0.4 * np.sin(2 * np.pi * 500 * t)
    feat = logmel_feature(x, 44100, CFG)
    assert feat.shape == (128,)
    assert np.all(np.isfinite(feat))
