"""Baseband OFDM simulation toolkit for acoustic links.

Subpackages cover the signal substrate (core), peak-ratio statistics
(metrics), sub-block phase-rotation peak reduction (pts), the amplifier
energy model (power), a minimal multipath channel (channel), and the
config-driven experiment harness (config, harness, cli).
"""

__version__ = "0.1.0"

from . import channel, config, core, harness, metrics, power, pts  # noqa: F401
