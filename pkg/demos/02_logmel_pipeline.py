"""The audio front end: decode, resample, log-mel, temporal pooling.

Synthesizes a tone sweep, pushes it through the default DSP configuration,
and shows where the energy lands in the mel bands.
"""

import numpy as np

from avsec.dsp import DspConfig, log_mel, logmel_feature, mel_band_edges, resample

cfg = DspConfig()
print(f"config: {cfg.target_sample_rate} Hz, fft {cfg.fft_size}, hop {cfg.hop}, "
      f"{cfg.n_mels} {cfg.mel_scale} mels, power {cfg.power}")

# a 44.1 kHz source tone, like the raw dataset audio
rate_in = 44100
t = np.arange(5 * rate_in) / rate_in
tone = 0.3 * np.sin(2 * np.pi * 1000.0 * t)

resampled = resample(tone, rate_in, cfg.target_sample_rate)
print(f"resampled {len(tone)} samples @ {rate_in} -> {len(resampled)} @ {cfg.target_sample_rate}")

spec = log_mel(resampled, cfg)
print(f"log-mel matrix: {spec.shape[0]} bands x {spec.shape[1]} frames, "
      f"range [{spec.min():.1f}, {spec.max():.1f}] dB")

centers = mel_band_edges(cfg)[1:-1]
peak_band = int(np.argmax(spec.mean(axis=1)))
print(f"hottest band: {peak_band} (center {centers[peak_band]:.0f} Hz) for a 1000 Hz tone")

feature = logmel_feature(tone, rate_in, cfg)
print(f"pooled clip feature: {feature.shape[0]} dims "
      f"(mean over time frames), top value {feature.max():.1f} dB")

silence = np.zeros(cfg.target_sample_rate)
floor = log_mel(silence, cfg)
print(f"silence hits the dB floor everywhere: {np.unique(floor)} dB")
