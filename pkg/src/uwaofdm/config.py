"""Config handling for the experiment harness.

Experiments are driven by a flat ``key = value`` text file plus command-line
overrides; unknown keys are rejected so typos cannot silently fall back to
defaults. The random seed must be given explicitly (file or flag) - there is
no silent nondeterminism anywhere in the harness.

Note on the default parameter set: with a 100 kHz sampling rate, 6.25 kHz of
occupied bandwidth and 1024 subcarriers, an "8192-point" rendering of one
symbol corresponds to n_subcarriers=1024 at oversampling 8; the library
always takes (N, L) explicitly, and the default oversampling here is 4, the
point beyond which measured peak growth is negligible.

Channel taps are written ``delay:gain_re:gain_im`` separated by ``;``. A
delay of the form ``r<metres>`` is converted to samples via the configured
sound speed and sampling rate, e.g. ``r37.5:0.3:0.1``.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields

from .channel import MultipathChannel, delay_from_range
from .core import SCHEMES, FrameConfig, ModulationScheme
from .pts import DEFAULT_SEARCH_BUDGET, PartitionScheme

__all__ = [
    "ExperimentConfig",
    "parse_config_file",
    "build_config",
    "config_fingerprint",
    "parse_taps",
]


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _parse_int_list(text: str) -> tuple:
    return tuple(int(part) for part in text.split(",") if part.strip())


@dataclass(frozen=True)
class ExperimentConfig:
    """Resolved, validated experiment parameters."""

    seed: int
    n_subcarriers: int = 1024
    scheme: str = "QPSK"
    cp_samples: int = 2500
    sample_rate: float = 100_000.0
    bandwidth: float = 6250.0
    n_ofdm_symbols: int = 23
    sound_speed: float = 1500.0
    oversampling: int = 4
    n_list: tuple = (64, 256, 1024)
    l_list: tuple = (1, 2, 4, 8)
    m_list: tuple = (1, 2, 4, 8, 16)
    phase_factors: int = 2
    partition: str = "adjacent"
    partition_seed: int = 0
    n_trials: int = 100_000
    ccdf_level: float = 1e-3
    threshold_min_db: float = 0.0
    threshold_max_db: float = 14.0
    threshold_step_db: float = 0.1
    search_budget: int = DEFAULT_SEARCH_BUDGET
    workers: int = 1
    p_out_avg_watts: float = 1.0
    out_dir: str = "out"
    n_frames: int = 1000
    roundtrip_subblocks: int = 4
    channel_taps: str = "0:1:0;1200:0.25:0.15"
    channel_noise_power: float = 0.0
    channel_seed: int = 1
    corrupt_side_info: bool = False

    def __post_init__(self):
        if self.seed < 0:
            raise ValueError("seed must be >= 0")
        if self.scheme not in SCHEMES:
            raise ValueError(f"unknown modulation scheme {self.scheme!r}")
        if self.n_trials < 1 or self.n_frames < 1:
            raise ValueError("n_trials and n_frames must be >= 1")
        if not 0.0 < self.ccdf_level < 1.0:
            raise ValueError("ccdf_level must lie in (0, 1)")
        if self.oversampling < 1 or any(l < 1 for l in self.l_list):
            raise ValueError("oversampling factors must be >= 1")
        if any(m < 1 for m in self.m_list) or self.roundtrip_subblocks < 1:
            raise ValueError("sub-block counts must be >= 1")
        if self.phase_factors < 2:
            raise ValueError("phase_factors must be >= 2")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")
        if self.threshold_step_db <= 0 or self.threshold_max_db <= self.threshold_min_db:
            raise ValueError("threshold grid is empty or decreasing")
        PartitionScheme(self.partition)
        # FrameConfig re-validates the physical-layer fields.
        self.frame_config()

    def modulation(self) -> ModulationScheme:
        return SCHEMES[self.scheme]

    def frame_config(self) -> FrameConfig:
        return FrameConfig(
            n_subcarriers=self.n_subcarriers,
            scheme=self.modulation(),
            cp_samples=self.cp_samples,
            sample_rate=self.sample_rate,
            bandwidth=self.bandwidth,
            n_ofdm_symbols=self.n_ofdm_symbols,
            sound_speed=self.sound_speed,
        )

    def channel(self) -> MultipathChannel:
        taps = parse_taps(self.channel_taps, self.sound_speed, self.sample_rate)
        return MultipathChannel(taps, self.channel_noise_power, self.channel_seed)


_PARSERS = {
    "seed": int,
    "n_subcarriers": int,
    "scheme": str,
    "cp_samples": int,
    "sample_rate": float,
    "bandwidth": float,
    "n_ofdm_symbols": int,
    "sound_speed": float,
    "oversampling": int,
    "n_list": _parse_int_list,
    "l_list": _parse_int_list,
    "m_list": _parse_int_list,
    "phase_factors": int,
    "partition": str,
    "partition_seed": int,
    "n_trials": int,
    "ccdf_level": float,
    "threshold_min_db": float,
    "threshold_max_db": float,
    "threshold_step_db": float,
    "search_budget": int,
    "workers": int,
    "p_out_avg_watts": float,
    "out_dir": str,
    "n_frames": int,
    "roundtrip_subblocks": int,
    "channel_taps": str,
    "channel_noise_power": float,
    "channel_seed": int,
    "corrupt_side_info": _parse_bool,
}

assert set(_PARSERS) == {f.name for f in fields(ExperimentConfig)}


def parse_config_file(path) -> dict:
    """Read ``key = value`` lines; '#' starts a comment, blanks are skipped."""
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value', got {raw.rstrip()!r}")
            key, _, value = line.partition("=")
            key = key.strip()
            if key in values:
                raise ValueError(f"{path}:{lineno}: duplicate key {key!r}")
            values[key] = value.strip()
    return values


def build_config(file_values: dict | None = None, overrides: dict | None = None) -> ExperimentConfig:
    """Merge file values and overrides into a validated config.

    Unknown keys are errors. ``overrides`` win over the file; the seed must
    appear in one of the two.
    """
    merged: dict = {}
    for source in (file_values or {}, overrides or {}):
        for key, value in source.items():
            if key not in _PARSERS:
                raise ValueError(f"unknown config key {key!r}")
            merged[key] = _PARSERS[key](value) if isinstance(value, str) else value
    if "seed" not in merged:
        raise ValueError("a seed is required (set 'seed' in the config file or pass --seed)")
    return ExperimentConfig(**merged)


def config_fingerprint(cfg: ExperimentConfig) -> str:
    """Stable digest of every resolved field, for run manifests."""
    canonical = "\n".join(
        f"{f.name}={getattr(cfg, f.name)!r}" for f in sorted(fields(cfg), key=lambda f: f.name)
    )
    return hashlib.sha256(canonical.encode()).hexdigest()


def parse_taps(text: str, sound_speed: float, sample_rate: float) -> tuple:
    """Parse ``delay:gain_re:gain_im;...`` into (delay_samples, gain) pairs."""
    taps = []
    for part in text.split(";"):
        part = part.strip()
        if not part:
            continue
        pieces = part.split(":")
        if len(pieces) != 3:
            raise ValueError(f"tap {part!r} must be delay:gain_re:gain_im")
        delay_text, re_text, im_text = (p.strip() for p in pieces)
        if delay_text.startswith("r"):
            delay = delay_from_range(float(delay_text[1:]), sound_speed, sample_rate)
        else:
            delay = int(delay_text)
        taps.append((delay, complex(float(re_text), float(im_text))))
    if not taps:
        raise ValueError("channel needs at least one tap")
    return tuple(taps)
