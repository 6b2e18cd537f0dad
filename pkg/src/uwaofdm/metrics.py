"""Peak-to-average power ratio measurement and exceedance statistics.

The headline metric is max|x[n]|^2 over the empirical mean power of the same
sample sequence, which makes it scale invariant. Exceedance (CCDF) curves are
estimated by Monte Carlo counting or taken from the closed-form
Gaussian-envelope model ``1 - (1 - e^{-z})^N`` with the threshold z in the
linear power domain.

A single quoted "peak ratio of a configuration" is always a CCDF read-out;
the read-out level is an explicit parameter everywhere (1e-3 by default in
the experiment layer) and is recorded in every serialized artifact.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .core import SymbolFrame, TimeSignal, ofdm_modulate

__all__ = [
    "PaprValue",
    "CcdfCurve",
    "EnvelopeStats",
    "compute_papr",
    "papr_of_frame",
    "papr_db_of_rows",
    "empirical_ccdf",
    "theoretical_ccdf",
    "envelope_gaussianity",
    "default_thresholds_db",
    "MIN_GAUSSIANITY_SAMPLES",
]

MIN_GAUSSIANITY_SAMPLES = 10_000

# Ratios this far below one are rounding dust from the mean, not misuse.
_RATIO_SLACK = 1e-9


@dataclass(frozen=True)
class PaprValue:
    """A peak-to-mean power ratio, kept in both linear and dB form."""

    linear: float
    db: float

    def __post_init__(self):
        if not math.isfinite(self.linear) or self.linear < 1.0:
            raise ValueError(f"peak/mean ratio must be finite and >= 1, got {self.linear}")
        if abs(self.db - 10.0 * math.log10(self.linear)) > 1e-9:
            raise ValueError("db field does not match 10*log10(linear)")

    @classmethod
    def from_linear(cls, linear: float) -> "PaprValue":
        linear = float(linear)
        if 1.0 - _RATIO_SLACK < linear < 1.0:
            linear = 1.0
        return cls(linear, 10.0 * math.log10(linear))

    @classmethod
    def from_db(cls, db: float) -> "PaprValue":
        db = float(db)
        if -10.0 * math.log10(1.0 + _RATIO_SLACK) < db < 0.0:
            db = 0.0
        return cls(10.0 ** (db / 10.0), db)


def compute_papr(signal: TimeSignal) -> PaprValue:
    """Peak over mean instantaneous power of a waveform."""
    power = np.abs(signal.samples) ** 2
    mean = float(np.mean(power))
    if mean == 0.0:
        raise ValueError("peak/mean ratio is undefined for an all-zero signal")
    return PaprValue.from_linear(float(np.max(power)) / mean)


def papr_of_frame(frame: SymbolFrame, oversampling: int = 1) -> PaprValue:
    """Peak ratio of the frame's waveform rendered at the given oversampling."""
    return compute_papr(ofdm_modulate(frame, oversampling))


def papr_db_of_rows(sample_rows: np.ndarray) -> np.ndarray:
    """Row-wise peak ratio in dB for a (n_frames, n_samples) waveform matrix."""
    rows = np.asarray(sample_rows)
    power = rows.real**2 + rows.imag**2
    mean = power.mean(axis=-1)
    if np.any(mean == 0.0):
        raise ValueError("peak/mean ratio is undefined for an all-zero signal")
    return 10.0 * np.log10(power.max(axis=-1) / mean)


@dataclass(frozen=True, eq=False)
class CcdfCurve:
    """Exceedance probabilities over an increasing dB threshold grid.

    ``n_trials`` is 0 for model curves.
    """

    thresholds_db: np.ndarray
    probabilities: np.ndarray
    n_trials: int
    n_subcarriers: int

    def __post_init__(self):
        thresholds = np.array(self.thresholds_db, dtype=float)
        probs = np.array(self.probabilities, dtype=float)
        if thresholds.ndim != 1 or thresholds.size == 0:
            raise ValueError("threshold grid must be a non-empty 1-D array")
        if np.any(np.diff(thresholds) <= 0):
            raise ValueError("threshold grid must be strictly increasing")
        if probs.shape != thresholds.shape:
            raise ValueError("probabilities must match the threshold grid")
        if np.any(probs < 0.0) or np.any(probs > 1.0):
            raise ValueError("probabilities must lie in [0, 1]")
        if np.any(np.diff(probs) > 1e-12):
            raise ValueError("probabilities must be non-increasing along the grid")
        if self.n_trials < 0 or self.n_subcarriers < 0:
            raise ValueError("n_trials and n_subcarriers must be >= 0")
        thresholds.setflags(write=False)
        probs.setflags(write=False)
        object.__setattr__(self, "thresholds_db", thresholds)
        object.__setattr__(self, "probabilities", probs)

    def quantile_db(self, level: float) -> float:
        """Threshold where the curve crosses ``level``, interpolated.

        Interpolation is linear in log10(probability) where possible.
        """
        if not 0.0 < level < 1.0:
            raise ValueError("level must lie in (0, 1)")
        z, p = self.thresholds_db, self.probabilities
        below = np.flatnonzero(p <= level)
        if below.size == 0:
            raise ValueError(f"curve never reaches level {level}; extend the grid")
        i = below[0]
        if i == 0:
            return float(z[0])
        p_hi, p_lo = p[i - 1], p[i]
        if p_hi <= level:
            return float(z[i - 1])
        if p_lo > 0.0:
            frac = (math.log10(p_hi) - math.log10(level)) / (math.log10(p_hi) - math.log10(p_lo))
        else:
            frac = (p_hi - level) / (p_hi - p_lo)
        return float(z[i - 1] + frac * (z[i] - z[i - 1]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["threshold_db", "probability"])
            for z, p in zip(self.thresholds_db, self.probabilities):
                writer.writerow([f"{z:.6g}", f"{p:.10g}"])


def default_thresholds_db() -> np.ndarray:
    """The default read-out grid: 0 to 14 dB in 0.1 dB steps."""
    return np.linspace(0.0, 14.0, 141)


def _as_db_array(papr_samples) -> np.ndarray:
    if isinstance(papr_samples, np.ndarray):
        return papr_samples.astype(float, copy=False)
    samples = list(papr_samples)
    if samples and isinstance(samples[0], PaprValue):
        return np.array([s.db for s in samples], dtype=float)
    return np.asarray(samples, dtype=float)


def empirical_ccdf(papr_samples, thresholds_db=None, n_subcarriers: int = 0) -> CcdfCurve:
    """Exceedance curve Pr(ratio_db > z) counted from observed samples.

    ``papr_samples`` may be PaprValue objects or raw dB values.
    """
    db = _as_db_array(papr_samples)
    if db.size == 0:
        raise ValueError("need at least one sample")
    thresholds = default_thresholds_db() if thresholds_db is None else np.asarray(thresholds_db, dtype=float)
    db_sorted = np.sort(db)
    exceed = db.size - np.searchsorted(db_sorted, thresholds, side="right")
    probs = exceed / db.size
    return CcdfCurve(thresholds, probs, n_trials=int(db.size), n_subcarriers=n_subcarriers)


def theoretical_ccdf(z_db, n_subcarriers: int):
    """Gaussian-envelope exceedance model 1 - (1 - e^{-z})^N, z linear.

    Accepts a scalar or an array of dB thresholds.
    """
    if n_subcarriers < 1:
        raise ValueError("n_subcarriers must be >= 1")
    z = np.power(10.0, np.asarray(z_db, dtype=float) / 10.0)
    with np.errstate(divide="ignore"):
        inner = np.log1p(-np.exp(-z))
    prob = -np.expm1(n_subcarriers * inner)
    prob = np.clip(prob, 0.0, 1.0)
    if np.isscalar(z_db):
        return float(prob)
    return prob


@dataclass(frozen=True)
class EnvelopeStats:
    """Aggregate first/second/fourth-moment summary of complex envelopes."""

    variance: float
    quadrature_mean: tuple
    quadrature_variance: tuple
    quadrature_excess_kurtosis: tuple
    n_samples: int

    def __post_init__(self):
        if self.variance < 0:
            raise ValueError("variance must be >= 0")


def _excess_kurtosis(values: np.ndarray) -> float:
    centred = values - values.mean()
    m2 = float(np.mean(centred**2))
    if m2 == 0.0:
        return 0.0
    m4 = float(np.mean(centred**4))
    return m4 / (m2 * m2) - 3.0


def envelope_gaussianity(signals: Iterable[TimeSignal] | Sequence[TimeSignal]) -> EnvelopeStats:
    """Pool samples from many waveforms and report per-quadrature statistics.

    For frames with many subcarriers the quadratures should look Gaussian:
    near-zero means and near-zero excess kurtosis.
    """
    pool = [s.samples for s in signals]
    if not pool:
        raise ValueError("need at least one signal")
    x = np.concatenate(pool)
    if x.size < MIN_GAUSSIANITY_SAMPLES:
        raise ValueError(
            f"need at least {MIN_GAUSSIANITY_SAMPLES} pooled samples, got {x.size}"
        )
    variance = float(np.mean(np.abs(x - x.mean()) ** 2))
    i, q = x.real, x.imag
    return EnvelopeStats(
        variance=variance,
        quadrature_mean=(float(i.mean()), float(q.mean())),
        quadrature_variance=(float(i.var()), float(q.var())),
        quadrature_excess_kurtosis=(_excess_kurtosis(i), _excess_kurtosis(q)),
        n_samples=int(x.size),
    )
