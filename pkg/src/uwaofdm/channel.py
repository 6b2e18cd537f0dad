"""Static tapped-delay-line propagation with seeded Gaussian noise.

Just enough channel to demonstrate end-to-end round trips: integer-sample
tap delays, complex tap gains, and circularly symmetric complex Gaussian
noise whose realisation is a pure function of the seed. Keeping the maximum
tap delay inside the cyclic prefix makes the per-symbol effect an exact
circular convolution, so a one-tap frequency-domain equaliser restores the
frame perfectly in the noiseless case.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import TimeSignal

__all__ = [
    "MultipathChannel",
    "apply_channel",
    "delay_from_range",
]


@dataclass(frozen=True, eq=False)
class MultipathChannel:
    """Taps as (delay_samples, gain) pairs, listed with non-decreasing delay."""

    taps: tuple
    noise_power: float = 0.0
    seed: int = 0

    def __post_init__(self):
        taps = tuple((int(d), complex(g)) for d, g in self.taps)
        if not taps:
            raise ValueError("channel needs at least one tap")
        delays = [d for d, _ in taps]
        if any(d < 0 for d in delays):
            raise ValueError("tap delays must be >= 0")
        if any(b < a for a, b in zip(delays, delays[1:])):
            raise ValueError("tap delays must be listed in non-decreasing order")
        if self.noise_power < 0:
            raise ValueError("noise power must be >= 0")
        object.__setattr__(self, "taps", taps)

    @property
    def max_delay(self) -> int:
        return self.taps[-1][0]

    def frequency_response(self, n_subcarriers: int, oversampling: int = 1) -> np.ndarray:
        """Per-carrier response seen after circular convolution.

        ``oversampling`` is the rendering factor of the waveform the taps act
        on; tap delays are in samples of that waveform. Carrier k sits at the
        signed frequency index k (k < N/2) or k - N (k >= N/2) of the
        oversampled grid, so
        H[k] = sum_t gain * exp(-2j*pi*f_k*delay/(L*N)).
        """
        n = n_subcarriers
        half = (n + 1) // 2
        k = np.arange(n)
        f = np.where(k < half, k, k - n)
        response = np.zeros(n, dtype=np.complex128)
        for delay, gain in self.taps:
            response += gain * np.exp(-2j * np.pi * f * delay / (oversampling * n))
        return response


def apply_channel(signal: TimeSignal, ch: MultipathChannel, seed: int | None = None) -> TimeSignal:
    """y[n] = sum_t gain * x[n - delay] + noise[n], same length as the input.

    Noise is complex circularly symmetric Gaussian with variance
    ``ch.noise_power``, drawn from ``seed`` (default: the channel's own seed)
    so identical seeds give bit-identical output.
    """
    x = signal.samples
    y = np.zeros_like(x)
    for delay, gain in ch.taps:
        if delay < x.size:
            y[delay:] += gain * x[: x.size - delay]
    if ch.noise_power > 0:
        rng = np.random.default_rng(ch.seed if seed is None else seed)
        scale = np.sqrt(ch.noise_power / 2.0)
        y = y + scale * (rng.standard_normal(x.size) + 1j * rng.standard_normal(x.size))
    return TimeSignal(y, signal.sample_rate, signal.oversampling)


def delay_from_range(range_m: float, sound_speed: float, sample_rate: float) -> int:
    """Propagation delay in whole samples for a path length in metres."""
    if range_m <= 0 or sound_speed <= 0 or sample_rate <= 0:
        raise ValueError("range, sound speed, and sample rate must be positive")
    return int(round(range_m / sound_speed * sample_rate))
