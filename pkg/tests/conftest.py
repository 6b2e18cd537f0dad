"""Shared helpers: random frames, an independent search oracle, and the
acceptance-line reporter.

The brute-force oracle works purely at the frequency-domain level (rotate
the frame, synthesise the full waveform, measure) so it shares no code path
with the engine's partial-waveform search.
"""
import numpy as np

acceptance_lines = []


def record_acceptance(criterion: str, ok: bool, detail: str) -> None:
    line = f"ACCEPTANCE {criterion} {'PASS' if ok else 'FAIL'}: {detail}"
    acceptance_lines.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if acceptance_lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in acceptance_lines:
            terminalreporter.write_line(line)

from uwaofdm.core import QPSK, SymbolFrame, ofdm_modulate
from uwaofdm.metrics import compute_papr


def random_frame(rng, n_subcarriers, scheme=QPSK):
    values = rng.integers(0, scheme.alphabet.size, n_subcarriers)
    return SymbolFrame(scheme.alphabet[values], n_subcarriers)


def random_complex_frame(rng, n_subcarriers):
    values = rng.standard_normal(n_subcarriers) + 1j * rng.standard_normal(n_subcarriers)
    return SymbolFrame(values, n_subcarriers)


def oracle_search(frame, plan, phases, oversampling):
    """Independent exhaustive minimiser over all phase digit strings.

    Enumerates candidates in the engine's documented order (big-endian
    digit strings, first strict minimum) but evaluates each one from
    scratch: rotate the frame per sub-block, synthesise the whole waveform,
    and measure its peak ratio.

    Returns (candidate_index, papr_linear, papr_of_candidate dict).
    """
    w = phases.order
    n_free = plan.n_subblocks - 1
    total = w**n_free
    best_c = -1
    best_papr = np.inf
    paprs = {}
    for c in range(total):
        digits = []
        value = c
        for _ in range(n_free):
            digits.append(value % w)
            value //= w
        digits.reverse()
        factors = np.concatenate([[1.0 + 0.0j], phases.values[digits]])
        rotated = SymbolFrame(
            frame.symbols * factors[plan.assignment], frame.n_subcarriers
        )
        papr = compute_papr(ofdm_modulate(rotated, oversampling)).linear
        paprs[c] = papr
        if papr < best_papr:
            best_papr = papr
            best_c = c
    return best_c, best_papr, paprs
