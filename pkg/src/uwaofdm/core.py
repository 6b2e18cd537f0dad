"""Baseband OFDM signal substrate.

Constellation mapping, unitary frequency<->time synthesis with optional
oversampling, and cyclic-prefix framing. Everything here is a pure function
of its inputs and the value types are immutable after construction, so they
can be shared freely between concurrent workers.

Conventions:

* synthesis kernel  x[n] = (1/sqrt(N)) * sum_k X_k * exp(+2j*pi*k'*n/(L*N))
  where the bin map k' keeps carriers 0..N/2-1 at the bottom of the
  oversampled grid and carriers N/2..N-1 at the top (centred spectrum).
  With this normalisation the mean power of the output equals
  (1/N)*sum|X_k|^2 for every oversampling factor, and the critically
  sampled waveform reappears exactly at stride L of any L-oversampled
  rendering.
* bit streams are plain 1-D integer arrays of 0/1; bit groups are read
  most-significant bit first.
* samples are complex double precision throughout.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "BPSK",
    "QPSK",
    "SCHEMES",
    "ModulationScheme",
    "SymbolFrame",
    "TimeSignal",
    "FrameConfig",
    "validate_bits",
    "map_symbols",
    "demap_symbols",
    "ofdm_modulate",
    "ofdm_demodulate",
    "modulate_many",
    "add_cyclic_prefix",
    "remove_cyclic_prefix",
    "samples_for_duration",
    "is_power_of_two",
]


def is_power_of_two(n: int) -> bool:
    return n >= 1 and (n & (n - 1)) == 0


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype)
    arr.setflags(write=False)
    return arr


def validate_bits(bits) -> np.ndarray:
    """Return ``bits`` as a 1-D uint8 array, rejecting anything but 0/1."""
    arr = np.asarray(bits)
    if arr.ndim != 1:
        raise ValueError(f"bit stream must be one-dimensional, got shape {arr.shape}")
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError("bit stream may only contain 0 and 1")
    return arr.astype(np.uint8)


@dataclass(frozen=True, eq=False)
class ModulationScheme:
    """A memoryless constellation with unit-magnitude points.

    ``alphabet[v]`` is the point for the bit group whose most-significant-
    bit-first value is ``v``.
    """

    name: str
    bits_per_symbol: int
    alphabet: np.ndarray

    def __post_init__(self):
        if self.bits_per_symbol < 1:
            raise ValueError("bits_per_symbol must be >= 1")
        alphabet = _frozen(self.alphabet, np.complex128)
        if alphabet.ndim != 1 or alphabet.size != 2 ** self.bits_per_symbol:
            raise ValueError(
                f"alphabet of {self.name} must hold 2**{self.bits_per_symbol} points"
            )
        if not np.allclose(np.abs(alphabet), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("alphabet points must have unit magnitude")
        if np.unique(np.round(alphabet, 12)).size != alphabet.size:
            raise ValueError("alphabet points must be distinct")
        object.__setattr__(self, "alphabet", alphabet)


BPSK = ModulationScheme("BPSK", 1, np.array([1.0, -1.0]))
# Gray-ordered axis points: 00 -> 1, 01 -> j, 11 -> -1, 10 -> -j.
QPSK = ModulationScheme("QPSK", 2, np.array([1.0, 1.0j, -1.0j, -1.0]))

SCHEMES = {"BPSK": BPSK, "QPSK": QPSK}


@dataclass(frozen=True, eq=False)
class SymbolFrame:
    """One OFDM symbol's frequency-domain points (length = subcarrier count)."""

    symbols: np.ndarray
    n_subcarriers: int

    def __post_init__(self):
        if not is_power_of_two(self.n_subcarriers):
            raise ValueError(
                f"subcarrier count must be a power of two >= 1, got {self.n_subcarriers}"
            )
        symbols = _frozen(self.symbols, np.complex128)
        if symbols.ndim != 1 or symbols.size != self.n_subcarriers:
            raise ValueError(
                f"expected {self.n_subcarriers} symbols, got array of shape {symbols.shape}"
            )
        object.__setattr__(self, "symbols", symbols)

    def mean_power(self) -> float:
        """(1/N) * sum|X_k|^2, the mean power of the synthesised waveform."""
        return float(np.mean(np.abs(self.symbols) ** 2))


@dataclass(frozen=True, eq=False)
class TimeSignal:
    """Complex baseband samples with sampling metadata."""

    samples: np.ndarray
    sample_rate: float = 1.0
    oversampling: int = 1

    def __post_init__(self):
        samples = _frozen(self.samples, np.complex128)
        if samples.ndim != 1 or samples.size == 0:
            raise ValueError("samples must be a non-empty 1-D sequence")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if int(self.oversampling) != self.oversampling or self.oversampling < 1:
            raise ValueError("oversampling must be an integer >= 1")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "oversampling", int(self.oversampling))

    def __len__(self) -> int:
        return self.samples.size

    def mean_power(self) -> float:
        return float(np.mean(np.abs(self.samples) ** 2))


@dataclass(frozen=True)
class FrameConfig:
    """Physical-layer frame parameters (defaults suit an acoustic link)."""

    n_subcarriers: int = 1024
    scheme: ModulationScheme = QPSK
    cp_samples: int = 2500
    sample_rate: float = 100_000.0
    bandwidth: float = 6250.0
    n_ofdm_symbols: int = 23
    sound_speed: float = 1500.0

    def __post_init__(self):
        if not is_power_of_two(self.n_subcarriers):
            raise ValueError("n_subcarriers must be a power of two")
        if self.cp_samples < 0:
            raise ValueError("cp_samples must be >= 0")
        if self.sample_rate <= 0 or self.bandwidth <= 0:
            raise ValueError("sample_rate and bandwidth must be positive")
        if self.bandwidth > self.sample_rate / 2:
            raise ValueError("bandwidth must not exceed sample_rate/2")
        if self.n_ofdm_symbols < 1:
            raise ValueError("n_ofdm_symbols must be >= 1")
        if self.sound_speed <= 0:
            raise ValueError("sound_speed must be positive")


def samples_for_duration(seconds: float, sample_rate: float) -> int:
    """Number of samples spanning ``seconds`` at ``sample_rate`` (rounded)."""
    if seconds < 0 or sample_rate <= 0:
        raise ValueError("duration must be >= 0 and sample_rate positive")
    return int(round(seconds * sample_rate))


def map_symbols(bits, scheme: ModulationScheme, n_subcarriers: int) -> SymbolFrame:
    """Map a bit stream onto one frame, one alphabet point per bit group."""
    bits = validate_bits(bits)
    expected = n_subcarriers * scheme.bits_per_symbol
    if bits.size != expected:
        raise ValueError(
            f"{scheme.name} needs {expected} bits for {n_subcarriers} subcarriers, "
            f"got {bits.size}"
        )
    groups = bits.reshape(n_subcarriers, scheme.bits_per_symbol)
    weights = 1 << np.arange(scheme.bits_per_symbol - 1, -1, -1)
    values = groups @ weights
    return SymbolFrame(scheme.alphabet[values], n_subcarriers)


def demap_symbols(frame: SymbolFrame, scheme: ModulationScheme) -> np.ndarray:
    """Nearest-point decision back to bits; exact inverse of map_symbols."""
    distances = np.abs(frame.symbols[:, None] - scheme.alphabet[None, :])
    values = np.argmin(distances, axis=1)
    shifts = np.arange(scheme.bits_per_symbol - 1, -1, -1)
    bits = (values[:, None] >> shifts[None, :]) & 1
    return bits.reshape(-1).astype(np.uint8)


def _padded_spectrum(symbols: np.ndarray, n_subcarriers: int, oversampling: int) -> np.ndarray:
    n_out = oversampling * n_subcarriers
    half = (n_subcarriers + 1) // 2
    spectrum = np.zeros(symbols.shape[:-1] + (n_out,), dtype=np.complex128)
    spectrum[..., :half] = symbols[..., :half]
    if n_subcarriers > half:
        spectrum[..., n_out - (n_subcarriers - half):] = symbols[..., half:]
    return spectrum


def ofdm_modulate(frame: SymbolFrame, oversampling: int = 1, sample_rate: float = 1.0) -> TimeSignal:
    """Synthesise the time-domain waveform of one frame.

    Returns L*N samples; the mean output power equals frame.mean_power()
    exactly for every integer oversampling factor L >= 1.
    """
    if int(oversampling) != oversampling or oversampling < 1:
        raise ValueError("oversampling must be an integer >= 1")
    oversampling = int(oversampling)
    n = frame.n_subcarriers
    spectrum = _padded_spectrum(frame.symbols, n, oversampling)
    samples = np.fft.ifft(spectrum) * (spectrum.size / math.sqrt(n))
    return TimeSignal(samples, sample_rate=sample_rate, oversampling=oversampling)


def modulate_many(symbol_rows: np.ndarray, oversampling: int = 1) -> np.ndarray:
    """Batch form of ofdm_modulate for an (n_frames, N) symbol matrix.

    Row i equals ofdm_modulate(SymbolFrame(symbol_rows[i], N)).samples.
    """
    rows = np.asarray(symbol_rows, dtype=np.complex128)
    if rows.ndim != 2:
        raise ValueError("symbol_rows must be a 2-D (n_frames, N) array")
    n = rows.shape[1]
    if not is_power_of_two(n):
        raise ValueError("row length must be a power of two")
    if int(oversampling) != oversampling or oversampling < 1:
        raise ValueError("oversampling must be an integer >= 1")
    spectrum = _padded_spectrum(rows, n, int(oversampling))
    return np.fft.ifft(spectrum, axis=-1) * (spectrum.shape[-1] / math.sqrt(n))


def ofdm_demodulate(signal: TimeSignal, n_subcarriers: int) -> SymbolFrame:
    """Recover the frame from a critically sampled waveform (CP removed)."""
    if len(signal) != n_subcarriers:
        raise ValueError(
            f"expected exactly {n_subcarriers} samples, got {len(signal)}"
        )
    spectrum = np.fft.fft(signal.samples) / math.sqrt(n_subcarriers)
    return SymbolFrame(spectrum, n_subcarriers)


def add_cyclic_prefix(signal: TimeSignal, cp_samples: int) -> TimeSignal:
    """Prepend the last cp_samples samples."""
    if cp_samples < 0 or cp_samples > len(signal):
        raise ValueError(
            f"cp_samples must be in [0, {len(signal)}], got {cp_samples}"
        )
    if cp_samples == 0:
        return signal
    samples = np.concatenate([signal.samples[-cp_samples:], signal.samples])
    return TimeSignal(samples, signal.sample_rate, signal.oversampling)


def remove_cyclic_prefix(signal: TimeSignal, cp_samples: int) -> TimeSignal:
    """Drop the first cp_samples samples; exact inverse of add_cyclic_prefix."""
    if cp_samples < 0 or cp_samples >= len(signal):
        raise ValueError(
            f"cp_samples must be in [0, {len(signal)}), got {cp_samples}"
        )
    if cp_samples == 0:
        return signal
    return TimeSignal(signal.samples[cp_samples:], signal.sample_rate, signal.oversampling)
