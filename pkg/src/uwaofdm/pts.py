"""Sub-block phase-rotation peak reduction.

The subcarriers of a frame are split into disjoint sub-blocks, each sub-block
is rotated by one unit-magnitude phase factor, and the rotation combination
with the smallest waveform peak wins. Because per-carrier rotation preserves
|X_k|, every candidate has the same mean power, so minimising the peak is
equivalent to minimising the peak-to-mean ratio and the average transmit
power is never changed.

The first phase factor is pinned to 1 (a global rotation never changes the
envelope), leaving W**(M-1) candidates for M sub-blocks and W allowed
factors. Candidates are indexed by the base-W digit string (d_1 .. d_{M-1}),
most significant digit first, with sub-block m >= 2 rotated by
values[d_{m-1}]; ties are broken by the first minimum in that order, so
results are bit-reproducible regardless of evaluation schedule.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import SymbolFrame, TimeSignal, modulate_many, ofdm_modulate, validate_bits
from .metrics import PaprValue, compute_papr

__all__ = [
    "PartitionScheme",
    "PartitionPlan",
    "PhaseFactorSet",
    "PhaseVector",
    "PtsResult",
    "SearchBudgetError",
    "DEFAULT_SEARCH_BUDGET",
    "make_partition",
    "partial_sequences",
    "pts_exhaustive",
    "pts_iterative_binary",
    "candidate_count",
    "encode_side_info",
    "decode_side_info",
    "apply_phase_rotation",
    "receiver_derotate",
    "pts_result_json",
]

DEFAULT_SEARCH_BUDGET = 1 << 20

# Height cap of the precomputed combination table in the sign search;
# 2**10 rows of a 4096-sample waveform is ~64 MiB.
_TABLE_BITS = 10

# Row-block size of the sign-search walk, in elements (~2 MiB complex).
_BLOCK_ELEMENTS = 1 << 17

# Candidate rows per chunk in the generic search, in matrix elements.
_CHUNK_ELEMENTS = 1 << 21


class SearchBudgetError(RuntimeError):
    """Raised when an exhaustive search would exceed the candidate budget."""


class PartitionScheme(enum.Enum):
    ADJACENT = "adjacent"
    INTERLEAVED = "interleaved"
    PSEUDO_RANDOM = "pseudorandom"


@dataclass(frozen=True, eq=False)
class PartitionPlan:
    """Assignment of every subcarrier to exactly one of M sub-blocks."""

    n_subcarriers: int
    n_subblocks: int
    scheme: PartitionScheme
    assignment: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        if not 1 <= self.n_subblocks <= self.n_subcarriers:
            raise ValueError(
                f"need 1 <= sub-blocks <= subcarriers, got M={self.n_subblocks}, N={self.n_subcarriers}"
            )
        assignment = np.array(self.assignment, dtype=np.int64)
        if assignment.shape != (self.n_subcarriers,):
            raise ValueError("assignment must list one sub-block index per subcarrier")
        counts = np.bincount(assignment, minlength=self.n_subblocks)
        if counts.size != self.n_subblocks or np.any(counts == 0):
            raise ValueError("every sub-block must own at least one subcarrier")
        if counts.max() - counts.min() > 1:
            raise ValueError("sub-block sizes may differ by at most one")
        assignment.setflags(write=False)
        object.__setattr__(self, "assignment", assignment)

    def block_indices(self, m: int) -> np.ndarray:
        """Subcarrier indices owned by sub-block ``m``."""
        return np.flatnonzero(self.assignment == m)


def _balanced_sizes(n: int, m: int) -> np.ndarray:
    sizes = np.full(m, n // m, dtype=np.int64)
    sizes[: n % m] += 1
    return sizes


def make_partition(
    n_subcarriers: int,
    n_subblocks: int,
    scheme: PartitionScheme | str = PartitionScheme.ADJACENT,
    seed: int | None = None,
) -> PartitionPlan:
    """Build a disjoint, exhaustive sub-block assignment.

    adjacent      contiguous runs of N/M carriers
    interleaved   sub-block m owns carriers {m, m+M, m+2M, ...}
    pseudorandom  seeded uniform permutation split into M balanced runs

    When M does not divide N the run sizes differ by at most one.
    """
    scheme = PartitionScheme(scheme)
    if n_subblocks < 1 or n_subblocks > n_subcarriers:
        raise ValueError(
            f"need 1 <= sub-blocks <= subcarriers, got M={n_subblocks}, N={n_subcarriers}"
        )
    if scheme is PartitionScheme.ADJACENT:
        assignment = np.repeat(np.arange(n_subblocks), _balanced_sizes(n_subcarriers, n_subblocks))
    elif scheme is PartitionScheme.INTERLEAVED:
        assignment = np.arange(n_subcarriers) % n_subblocks
    else:
        if seed is None:
            raise ValueError("pseudorandom partitioning needs a seed")
        order = np.random.default_rng(seed).permutation(n_subcarriers)
        assignment = np.empty(n_subcarriers, dtype=np.int64)
        assignment[order] = np.repeat(
            np.arange(n_subblocks), _balanced_sizes(n_subcarriers, n_subblocks)
        )
    return PartitionPlan(n_subcarriers, n_subblocks, scheme, assignment, seed)


@dataclass(frozen=True, eq=False)
class PhaseFactorSet:
    """The W allowed rotations exp(2j*pi*i/W), i = 0..W-1 (value 1 first)."""

    order: int
    values: np.ndarray

    def __post_init__(self):
        if self.order < 1:
            raise ValueError("order must be >= 1")
        values = np.array(self.values, dtype=np.complex128)
        if values.shape != (self.order,):
            raise ValueError("need exactly one value per root")
        if values[0] != 1.0:
            raise ValueError("the first phase factor must be 1")
        if not np.allclose(np.abs(values), 1.0, rtol=0.0, atol=1e-12):
            raise ValueError("phase factors must have unit magnitude")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def of_order(cls, order: int) -> "PhaseFactorSet":
        if order < 1:
            raise ValueError("order must be >= 1")
        if order > (1 << 24):
            raise ValueError(f"phase factor sets of order {order} are not supported")
        # Exact quadrant values for the common orders.
        if order == 1:
            values = np.array([1.0 + 0.0j])
        elif order == 2:
            values = np.array([1.0 + 0.0j, -1.0 + 0.0j])
        elif order == 4:
            values = np.array([1.0 + 0.0j, 1.0j, -1.0 + 0.0j, -1.0j])
        else:
            values = np.exp(2j * np.pi * np.arange(order) / order)
            values[0] = 1.0
        return cls(order, values)


@dataclass(frozen=True, eq=False)
class PhaseVector:
    """One rotation per sub-block; the first entry is pinned to 1."""

    factors: np.ndarray

    def __post_init__(self):
        factors = np.array(self.factors, dtype=np.complex128)
        if factors.ndim != 1 or factors.size == 0:
            raise ValueError("factors must be a non-empty 1-D sequence")
        if factors[0] != 1.0:
            raise ValueError("the first phase factor is pinned to 1")
        if not np.allclose(np.abs(factors), 1.0, rtol=0.0, atol=1e-9):
            raise ValueError("phase factors must have unit magnitude")
        factors.setflags(write=False)
        object.__setattr__(self, "factors", factors)

    def __len__(self) -> int:
        return self.factors.size


@dataclass(frozen=True, eq=False)
class PtsResult:
    """Outcome of one phase search: winning rotation, waveform, and bookkeeping."""

    phase_vector: PhaseVector
    signal: TimeSignal
    papr_before: PaprValue
    papr_after: PaprValue
    side_info_bits: np.ndarray
    candidates_evaluated: int
    phase_indices: np.ndarray

    def __post_init__(self):
        if self.papr_after.linear > self.papr_before.linear + 1e-12:
            raise ValueError("search must never worsen the peak ratio")
        bits = validate_bits(self.side_info_bits)
        bits.setflags(write=False)
        indices = np.array(self.phase_indices, dtype=np.int64)
        indices.setflags(write=False)
        object.__setattr__(self, "side_info_bits", bits)
        object.__setattr__(self, "phase_indices", indices)


def candidate_count(order: int, n_subblocks: int) -> int:
    """Exact size W**(M-1) of the search space (exact integer arithmetic)."""
    if order < 1 or n_subblocks < 1:
        raise ValueError("order and n_subblocks must be >= 1")
    approx_bits = (n_subblocks - 1) * math.log2(order) if order > 1 else 0.0
    if approx_bits > 1_000_000:
        raise OverflowError(
            f"candidate count {order}**{n_subblocks - 1} needs ~{approx_bits:.0f} bits"
        )
    return order ** (n_subblocks - 1)


def _partial_matrix(frame: SymbolFrame, plan: PartitionPlan, oversampling: int) -> np.ndarray:
    if plan.n_subcarriers != frame.n_subcarriers:
        raise ValueError(
            f"plan covers {plan.n_subcarriers} subcarriers but frame has {frame.n_subcarriers}"
        )
    masks = plan.assignment[None, :] == np.arange(plan.n_subblocks)[:, None]
    masked = masks * frame.symbols[None, :]
    return modulate_many(masked, oversampling)


def partial_sequences(frame: SymbolFrame, plan: PartitionPlan, oversampling: int = 1) -> list[TimeSignal]:
    """Per-sub-block waveforms; their sum is the full frame's waveform."""
    rows = _partial_matrix(frame, plan, oversampling)
    return [TimeSignal(row, oversampling=oversampling) for row in rows]


def _peak_power_rows(rows: np.ndarray) -> np.ndarray:
    power = rows.real**2 + rows.imag**2
    return power.max(axis=-1)


def _sign_table(vectors: np.ndarray, start: np.ndarray) -> np.ndarray:
    """All sign combinations start + sum(+/- vectors) by recursive doubling.

    Row r applies the big-endian bits of r to ``vectors`` (0 -> +, 1 -> -).
    """
    n_bits = vectors.shape[0]
    table = np.empty((1 << n_bits, start.size), dtype=np.complex128)
    table[0] = start
    size = 1
    for j in range(n_bits):
        x = vectors[j]
        prev = table[:size].copy()
        table[0 : 2 * size : 2] = prev + x
        table[1 : 2 * size : 2] = prev - x
        size *= 2
    return table


def _search_signs(partials: np.ndarray) -> tuple[int, float]:
    """First-minimum peak over every +/-1 choice for partials[1:].

    Candidate c encodes the signs as big-endian bits (0 -> +1, 1 -> -1).
    The combinations of the leading bits are tabulated once by recursive
    doubling and the remaining bits become a small table of tail offsets;
    the table is then walked in cache-sized row blocks, each reused across
    every tail offset, so the large table streams from memory only once.
    The explicit (peak, candidate) ordering makes the outcome independent
    of the block walk.
    """
    n_free = partials.shape[0] - 1
    if n_free == 0:
        return 0, float(_peak_power_rows(partials[0]))
    table_bits = min(n_free, _TABLE_BITS)
    tail_bits = n_free - table_bits
    n_samples = partials.shape[1]

    table = _sign_table(partials[1 : 1 + table_bits], partials[0])
    tails = None
    if tail_bits:
        tails = _sign_table(
            partials[1 + table_bits :], np.zeros(n_samples, dtype=np.complex128)
        )

    best_peak = math.inf
    best_c = -1
    n_tail = 1 << tail_bits
    row_block = max(1, _BLOCK_ELEMENTS // n_samples)
    buf = np.empty((min(row_block, table.shape[0]), n_samples), dtype=np.complex128)
    power = np.empty_like(buf, dtype=float)
    for r0 in range(0, table.shape[0], row_block):
        block = table[r0 : r0 + row_block]
        for t in range(n_tail):
            if tails is None:
                rows = block
            else:
                rows = np.add(block, tails[t], out=buf[: block.shape[0]])
            p = np.multiply(rows.real, rows.real, out=power[: block.shape[0]])
            p += rows.imag**2
            peaks = p.max(axis=1)
            i = int(np.argmin(peaks))
            peak = float(peaks[i])
            c = ((r0 + i) << tail_bits) | t
            if peak < best_peak or (peak == best_peak and c < best_c):
                best_peak = peak
                best_c = c
    return best_c, best_peak


def _search_phases(partials: np.ndarray, values: np.ndarray) -> tuple[int, float]:
    """Chunked enumeration of all digit strings for order > 2."""
    w = values.size
    n_free = partials.shape[0] - 1
    if n_free == 0:
        return 0, float(_peak_power_rows(partials[0]))
    total = w**n_free
    n_samples = partials.shape[1]
    chunk = max(1, _CHUNK_ELEMENTS // n_samples)
    powers = w ** np.arange(n_free - 1, -1, -1, dtype=np.int64)
    best_peak = math.inf
    best_c = -1
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // powers[None, :]) % w
        rows = values[digits] @ partials[1:] + partials[0]
        peaks = _peak_power_rows(rows)
        i = int(np.argmin(peaks))
        peak = float(peaks[i])
        if peak < best_peak:
            best_peak = peak
            best_c = start + i
    return best_c, best_peak


def _digits_of(c: int, order: int, n_free: int) -> np.ndarray:
    digits = np.empty(n_free, dtype=np.int64)
    for j in range(n_free - 1, -1, -1):
        digits[j] = c % order
        c //= order
    return digits


def _result(
    frame: SymbolFrame,
    plan: PartitionPlan,
    phases: PhaseFactorSet,
    partials: np.ndarray,
    digits: np.ndarray,
    oversampling: int,
    candidates: int,
) -> PtsResult:
    factors = np.concatenate([[1.0 + 0.0j], phases.values[digits]])
    if digits.size:
        combined = partials[0] + factors[1:] @ partials[1:]
    else:
        combined = partials[0]
    vector = PhaseVector(factors)
    signal = TimeSignal(combined, oversampling=oversampling)
    return PtsResult(
        phase_vector=vector,
        signal=signal,
        papr_before=compute_papr(ofdm_modulate(frame, oversampling)),
        papr_after=compute_papr(signal),
        side_info_bits=encode_side_info(vector, phases),
        candidates_evaluated=candidates,
        phase_indices=np.concatenate([[0], digits]),
    )


def pts_exhaustive(
    frame: SymbolFrame,
    plan: PartitionPlan,
    phases: PhaseFactorSet,
    oversampling: int = 4,
    budget: int | None = DEFAULT_SEARCH_BUDGET,
) -> PtsResult:
    """Search all W**(M-1) rotation combinations for the smallest peak.

    The peak is evaluated on the waveform rendered at ``oversampling`` so the
    optimisation target matches the reported metric. Raises
    SearchBudgetError when the candidate count exceeds ``budget``.
    """
    if phases.order < 2:
        raise ValueError("exhaustive search needs at least two phase factors")
    n_candidates = candidate_count(phases.order, plan.n_subblocks)
    if budget is not None and n_candidates > budget:
        raise SearchBudgetError(
            f"{phases.order}**{plan.n_subblocks - 1} = {n_candidates} candidates "
            f"exceeds the search budget of {budget}"
        )
    partials = _partial_matrix(frame, plan, oversampling)
    if phases.order == 2:
        best_c, _ = _search_signs(partials)
    else:
        best_c, _ = _search_phases(partials, phases.values)
    digits = _digits_of(best_c, phases.order, plan.n_subblocks - 1)
    return _result(frame, plan, phases, partials, digits, oversampling, n_candidates)


def pts_iterative_binary(
    frame: SymbolFrame,
    plan: PartitionPlan,
    oversampling: int = 4,
) -> PtsResult:
    """One greedy pass of trial sign flips, kept only when the peak drops.

    Starts from all +1; sub-blocks 2..M are visited once in order, so only
    M-1 candidates are evaluated beyond the starting point. The result uses
    factors from {+1, -1} and is never worse than no rotation.
    """
    phases = PhaseFactorSet.of_order(2)
    partials = _partial_matrix(frame, plan, oversampling)
    current = partials.sum(axis=0)
    best_peak = float(_peak_power_rows(current))
    digits = np.zeros(plan.n_subblocks - 1, dtype=np.int64)
    for m in range(1, plan.n_subblocks):
        trial = current - 2.0 * partials[m]
        peak = float(_peak_power_rows(trial))
        if peak < best_peak:
            current = trial
            best_peak = peak
            digits[m - 1] = 1
    return _result(
        frame, plan, phases, partials, digits, oversampling, plan.n_subblocks - 1
    )


def _bits_per_factor(order: int) -> int:
    return (order - 1).bit_length()


def encode_side_info(vector: PhaseVector, phases: PhaseFactorSet) -> np.ndarray:
    """Index-encode factors 2..M, ceil(log2(W)) bits each, MSB first."""
    bits_per = _bits_per_factor(phases.order)
    out = np.zeros((len(vector) - 1) * bits_per, dtype=np.uint8)
    for m, factor in enumerate(vector.factors[1:]):
        deltas = np.abs(phases.values - factor)
        index = int(np.argmin(deltas))
        if deltas[index] > 1e-9:
            raise ValueError(f"factor {factor} is not in the order-{phases.order} set")
        for j in range(bits_per):
            out[m * bits_per + j] = (index >> (bits_per - 1 - j)) & 1
    return out


def decode_side_info(bits, n_subblocks: int, phases: PhaseFactorSet) -> PhaseVector:
    """Inverse of encode_side_info; validates length and index range."""
    bits = validate_bits(bits)
    bits_per = _bits_per_factor(phases.order)
    expected = (n_subblocks - 1) * bits_per
    if bits.size != expected:
        raise ValueError(
            f"expected {expected} side-information bits for M={n_subblocks}, "
            f"W={phases.order}, got {bits.size}"
        )
    factors = np.ones(n_subblocks, dtype=np.complex128)
    for m in range(n_subblocks - 1):
        group = bits[m * bits_per : (m + 1) * bits_per]
        index = 0
        for bit in group:
            index = (index << 1) | int(bit)
        if index >= phases.order:
            raise ValueError(f"phase index {index} out of range for order {phases.order}")
        factors[m + 1] = phases.values[index]
    return PhaseVector(factors)


def apply_phase_rotation(frame: SymbolFrame, plan: PartitionPlan, vector: PhaseVector) -> SymbolFrame:
    """Rotate each sub-block's carriers by its phase factor (transmit side)."""
    if len(vector) != plan.n_subblocks or plan.n_subcarriers != frame.n_subcarriers:
        raise ValueError("frame, plan, and phase vector sizes are inconsistent")
    return SymbolFrame(frame.symbols * vector.factors[plan.assignment], frame.n_subcarriers)


def receiver_derotate(frame: SymbolFrame, plan: PartitionPlan, vector: PhaseVector) -> SymbolFrame:
    """Undo apply_phase_rotation using the conjugate factors."""
    if len(vector) != plan.n_subblocks or plan.n_subcarriers != frame.n_subcarriers:
        raise ValueError("frame, plan, and phase vector sizes are inconsistent")
    return SymbolFrame(
        frame.symbols * np.conj(vector.factors)[plan.assignment], frame.n_subcarriers
    )


def pts_result_json(result: PtsResult, plan: PartitionPlan, phases: PhaseFactorSet) -> dict:
    """JSON-ready summary of one search outcome."""
    return {
        "scheme": plan.scheme.value,
        "n_subblocks": plan.n_subblocks,
        "phase_order": phases.order,
        "seed": plan.seed,
        "phase_indices": [int(i) for i in result.phase_indices],
        "papr_before_db": result.papr_before.db,
        "papr_after_db": result.papr_after.db,
        "candidates_evaluated": result.candidates_evaluated,
        "side_info_bits": [int(b) for b in result.side_info_bits],
    }
