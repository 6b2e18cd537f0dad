"""Config-driven, seeded experiment runners.

Every experiment fans a single master seed out to per-trial seeds through
``SeedSequence([master_seed, trial_index, ...])``, so any trial is
reproducible in isolation and results are byte-identical regardless of the
worker count: workers only fill disjoint slices of preallocated arrays and
aggregation is order-insensitive counting. Each run writes a JSON manifest
(resolved config, config digest, seed, read-out level, library versions,
output list) sufficient to rerun it.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import fields

import numpy as np

from . import __version__
from .channel import apply_channel
from .config import ExperimentConfig, config_fingerprint
from .core import (
    ModulationScheme,
    SymbolFrame,
    TimeSignal,
    add_cyclic_prefix,
    demap_symbols,
    map_symbols,
    modulate_many,
    ofdm_demodulate,
    ofdm_modulate,
    remove_cyclic_prefix,
)
from .metrics import (
    CcdfCurve,
    PaprValue,
    compute_papr,
    empirical_ccdf,
    papr_db_of_rows,
    theoretical_ccdf,
)
from .power import make_power_report, power_report_json, saving_gain
from .pts import (
    PhaseFactorSet,
    candidate_count,
    decode_side_info,
    make_partition,
    apply_phase_rotation,
    pts_exhaustive,
    pts_iterative_binary,
    receiver_derotate,
)

__all__ = [
    "derive_rng",
    "derive_seed",
    "papr_samples_db",
    "pts_reduction_samples",
    "run_time_domain",
    "run_ccdf_vs_n",
    "run_oversampling_sweep",
    "run_pts_sweep",
    "run_roundtrip",
]

# Cap on elements per modulated chunk, to bound working memory.
_CHUNK_ELEMENTS = 1 << 22


def derive_rng(master_seed: int, *path: int) -> np.random.Generator:
    """Deterministic per-trial generator from (master seed, counters...)."""
    return np.random.default_rng(np.random.SeedSequence([master_seed, *path]))


def derive_seed(master_seed: int, *path: int) -> int:
    """Deterministic child seed from (master seed, counters...)."""
    return int(np.random.SeedSequence([master_seed, *path]).generate_state(1, np.uint64)[0])


def _symbol_row(rng: np.random.Generator, n_subcarriers: int, scheme: ModulationScheme) -> np.ndarray:
    """Random constellation row, identical to mapping fresh random bits."""
    bits = rng.integers(0, 2, n_subcarriers * scheme.bits_per_symbol, dtype=np.uint8)
    groups = bits.reshape(n_subcarriers, scheme.bits_per_symbol)
    weights = 1 << np.arange(scheme.bits_per_symbol - 1, -1, -1)
    return scheme.alphabet[groups @ weights]


def _map_chunks(fill, n_total: int, workers: int, chunk: int) -> None:
    spans = [(lo, min(lo + chunk, n_total)) for lo in range(0, n_total, chunk)]
    if workers <= 1:
        for span in spans:
            fill(*span)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda span: fill(*span), spans))


def papr_samples_db(
    n_subcarriers: int,
    scheme: ModulationScheme,
    oversampling_factors,
    n_trials: int,
    seed: int,
    workers: int = 1,
) -> np.ndarray:
    """Peak-ratio samples (dB), shape (len(factors), n_trials).

    The same per-trial frames are rendered at every oversampling factor, so
    rows are directly comparable.
    """
    factors = tuple(int(f) for f in oversampling_factors)
    if not factors or any(f < 1 for f in factors):
        raise ValueError("need at least one oversampling factor >= 1")
    out = np.empty((len(factors), n_trials), dtype=float)
    chunk = max(1, _CHUNK_ELEMENTS // (n_subcarriers * max(factors)))

    def fill(lo: int, hi: int) -> None:
        rows = np.empty((hi - lo, n_subcarriers), dtype=np.complex128)
        for trial in range(lo, hi):
            rows[trial - lo] = _symbol_row(derive_rng(seed, trial), n_subcarriers, scheme)
        for i, factor in enumerate(factors):
            out[i, lo:hi] = papr_db_of_rows(modulate_many(rows, factor))

    _map_chunks(fill, n_trials, workers, chunk)
    return out


def pts_reduction_samples(
    n_subcarriers: int,
    scheme: ModulationScheme,
    oversampling: int,
    n_subblocks: int,
    phase_order: int,
    partition: str,
    partition_seed: int,
    n_trials: int,
    seed: int,
    budget: int,
    workers: int = 1,
) -> tuple[np.ndarray, str, int]:
    """Post-search peak-ratio samples (dB) over seeded trials.

    Uses the exhaustive search while the candidate count fits the budget and
    the greedy sign pass otherwise; returns (samples, mode, candidate count).
    """
    plan = make_partition(
        n_subcarriers,
        n_subblocks,
        partition,
        seed=partition_seed if partition == "pseudorandom" else None,
    )
    n_candidates = candidate_count(phase_order, n_subblocks)
    phases = PhaseFactorSet.of_order(phase_order)
    mode = "exhaustive" if n_candidates <= budget else "iterative"
    out = np.empty(n_trials, dtype=float)

    def fill(lo: int, hi: int) -> None:
        for trial in range(lo, hi):
            frame = SymbolFrame(
                _symbol_row(derive_rng(seed, trial), n_subcarriers, scheme), n_subcarriers
            )
            if mode == "exhaustive":
                result = pts_exhaustive(frame, plan, phases, oversampling, budget)
            else:
                result = pts_iterative_binary(frame, plan, oversampling)
            out[trial] = result.papr_after.db

    _map_chunks(fill, n_trials, workers, max(1, n_trials // (4 * workers) if workers > 1 else n_trials))
    return out, mode, n_candidates


def _thresholds(cfg: ExperimentConfig) -> np.ndarray:
    count = int(round((cfg.threshold_max_db - cfg.threshold_min_db) / cfg.threshold_step_db)) + 1
    return np.linspace(cfg.threshold_min_db, cfg.threshold_max_db, count)


def _write_json(path: str, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_sidecar(csv_path: str, *, n_trials, n_subcarriers, oversampling, seed, scheme) -> str:
    path = os.path.splitext(csv_path)[0] + ".meta.json"
    _write_json(
        path,
        {
            "n_trials": n_trials,
            "n_subcarriers": n_subcarriers,
            "L": oversampling,
            "seed": seed,
            "scheme": scheme,
        },
    )
    return path


def _write_manifest(out_dir: str, command: str, cfg: ExperimentConfig, outputs: list, extra: dict) -> str:
    path = os.path.join(out_dir, f"manifest_{command.replace('-', '_')}.json")
    payload = {
        "command": command,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "seed": cfg.seed,
        "ccdf_level": cfg.ccdf_level,
        "config": {f.name: getattr(cfg, f.name) for f in fields(cfg)},
        "config_sha256": config_fingerprint(cfg),
        "outputs": sorted(os.path.basename(p) for p in outputs),
    }
    payload.update(extra)
    _write_json(path, payload)
    return path


def _prepare_out_dir(cfg: ExperimentConfig, out_dir: str | None) -> str:
    resolved = out_dir or cfg.out_dir
    os.makedirs(resolved, exist_ok=True)
    return resolved


def run_time_domain(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Render one seeded frame and dump its envelope magnitude as CSV."""
    out_dir = _prepare_out_dir(cfg, out_dir)
    scheme = cfg.modulation()
    frame = SymbolFrame(_symbol_row(derive_rng(cfg.seed, 0), cfg.n_subcarriers, scheme), cfg.n_subcarriers)
    signal = ofdm_modulate(frame, cfg.oversampling, cfg.sample_rate)
    papr = compute_papr(signal)

    csv_path = os.path.join(out_dir, f"time_domain_n{cfg.n_subcarriers}_L{cfg.oversampling}.csv")
    magnitude = np.abs(signal.samples)
    with open(csv_path, "w") as fh:
        fh.write("sample_index,time_s,magnitude\n")
        for i, mag in enumerate(magnitude):
            fh.write(f"{i},{i / signal.sample_rate:.9g},{mag:.12g}\n")

    manifest = _write_manifest(
        out_dir, "time-domain", cfg, [csv_path], {"papr_db": papr.db, "papr_linear": papr.linear}
    )
    return {"papr_db": papr.db, "csv": csv_path, "manifest": manifest, "n_samples": len(signal)}


def run_ccdf_vs_n(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Monte Carlo exceedance curves for each subcarrier count, with the
    closed-form overlay, plus the read-out quantile at the configured level."""
    out_dir = _prepare_out_dir(cfg, out_dir)
    scheme = cfg.modulation()
    thresholds = _thresholds(cfg)
    outputs: list = []
    quantiles: dict = {}
    curves: dict = {}
    for n in cfg.n_list:
        samples = papr_samples_db(n, scheme, [cfg.oversampling], cfg.n_trials, cfg.seed, cfg.workers)[0]
        curve = empirical_ccdf(samples, thresholds, n_subcarriers=n)
        csv_path = os.path.join(out_dir, f"ccdf_n{n}_L{cfg.oversampling}.csv")
        curve.to_csv(csv_path)
        outputs.append(csv_path)
        outputs.append(
            _write_sidecar(
                csv_path,
                n_trials=cfg.n_trials,
                n_subcarriers=n,
                oversampling=cfg.oversampling,
                seed=cfg.seed,
                scheme=scheme.name,
            )
        )
        theory = CcdfCurve(thresholds, theoretical_ccdf(thresholds, n), n_trials=0, n_subcarriers=n)
        theory_path = os.path.join(out_dir, f"ccdf_n{n}_theory.csv")
        theory.to_csv(theory_path)
        outputs.append(theory_path)
        outputs.append(
            _write_sidecar(
                theory_path,
                n_trials=0,
                n_subcarriers=n,
                oversampling=1,
                seed=None,
                scheme=None,
            )
        )
        quantiles[n] = float(np.quantile(samples, 1.0 - cfg.ccdf_level))
        curves[n] = curve
    manifest = _write_manifest(
        out_dir,
        "ccdf",
        cfg,
        outputs,
        {"quantiles_db": {str(n): q for n, q in quantiles.items()}},
    )
    return {"quantiles_db": quantiles, "curves": curves, "outputs": outputs, "manifest": manifest}


def run_oversampling_sweep(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Exceedance curves over oversampling factors with shared frames."""
    out_dir = _prepare_out_dir(cfg, out_dir)
    scheme = cfg.modulation()
    thresholds = _thresholds(cfg)
    samples = papr_samples_db(
        cfg.n_subcarriers, scheme, cfg.l_list, cfg.n_trials, cfg.seed, cfg.workers
    )
    outputs: list = []
    quantiles: dict = {}
    curves: dict = {}
    for i, factor in enumerate(cfg.l_list):
        curve = empirical_ccdf(samples[i], thresholds, n_subcarriers=cfg.n_subcarriers)
        csv_path = os.path.join(out_dir, f"ccdf_n{cfg.n_subcarriers}_L{factor}.csv")
        curve.to_csv(csv_path)
        outputs.append(csv_path)
        outputs.append(
            _write_sidecar(
                csv_path,
                n_trials=cfg.n_trials,
                n_subcarriers=cfg.n_subcarriers,
                oversampling=factor,
                seed=cfg.seed,
                scheme=scheme.name,
            )
        )
        quantiles[factor] = float(np.quantile(samples[i], 1.0 - cfg.ccdf_level))
        curves[factor] = curve
    manifest = _write_manifest(
        out_dir,
        "oversampling",
        cfg,
        outputs,
        {"quantiles_db": {str(f): q for f, q in quantiles.items()}},
    )
    return {"quantiles_db": quantiles, "curves": curves, "outputs": outputs, "manifest": manifest}


def run_pts_sweep(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Peak-reduction sweep over sub-block counts.

    Per M: the search mode (exhaustive within budget, else the greedy sign
    pass), candidate count, post-search exceedance curve, read-out quantile,
    saving gain versus the M=1 baseline, and an energy report.
    """
    out_dir = _prepare_out_dir(cfg, out_dir)
    scheme = cfg.modulation()
    thresholds = _thresholds(cfg)
    baseline = papr_samples_db(
        cfg.n_subcarriers, scheme, [cfg.oversampling], cfg.n_trials, cfg.seed, cfg.workers
    )[0]
    q_base = float(np.quantile(baseline, 1.0 - cfg.ccdf_level))
    outputs: list = []
    table: list = []
    curves: dict = {}
    for m in cfg.m_list:
        samples, mode, n_candidates = pts_reduction_samples(
            cfg.n_subcarriers,
            scheme,
            cfg.oversampling,
            m,
            cfg.phase_factors,
            cfg.partition,
            cfg.partition_seed,
            cfg.n_trials,
            cfg.seed,
            cfg.search_budget,
            cfg.workers,
        )
        curve = empirical_ccdf(samples, thresholds, n_subcarriers=cfg.n_subcarriers)
        csv_path = os.path.join(
            out_dir, f"pts_n{cfg.n_subcarriers}_M{m}_W{cfg.phase_factors}.csv"
        )
        curve.to_csv(csv_path)
        outputs.append(csv_path)
        outputs.append(
            _write_sidecar(
                csv_path,
                n_trials=cfg.n_trials,
                n_subcarriers=cfg.n_subcarriers,
                oversampling=cfg.oversampling,
                seed=cfg.seed,
                scheme=scheme.name,
            )
        )
        quantile = float(np.quantile(samples, 1.0 - cfg.ccdf_level))
        report = make_power_report(
            cfg.p_out_avg_watts, PaprValue.from_db(q_base), PaprValue.from_db(quantile)
        )
        table.append(
            {
                "n_subblocks": m,
                "search_mode": mode,
                "candidates": n_candidates,
                "quantile_db": quantile,
                "saving_gain_db": saving_gain(
                    PaprValue.from_db(q_base), PaprValue.from_db(quantile)
                ),
                "power": power_report_json(report),
            }
        )
        curves[m] = curve
    summary_path = os.path.join(out_dir, "pts_sweep_summary.json")
    _write_json(
        summary_path,
        {
            "baseline_quantile_db": q_base,
            "ccdf_level": cfg.ccdf_level,
            "phase_order": cfg.phase_factors,
            "partition": cfg.partition,
            "rows": table,
        },
    )
    outputs.append(summary_path)
    manifest = _write_manifest(
        out_dir,
        "pts-sweep",
        cfg,
        outputs,
        {"baseline_quantile_db": q_base, "n_trials": cfg.n_trials},
    )
    return {
        "baseline_quantile_db": q_base,
        "rows": table,
        "curves": curves,
        "outputs": outputs,
        "manifest": manifest,
    }


def run_roundtrip(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Full transmit/receive chain over seeded frames; counts bit errors.

    bits -> map -> peak-reduction search -> modulate at the configured
    oversampling (the physically sampled waveform; the guard interval and
    tap delays are in those samples) -> CP -> channel -> CP removal ->
    downsample to the critical grid -> demodulate -> known-channel
    equalisation -> de-rotation from decoded side information -> demap.
    Noiseless within-CP channels must come back error free.
    """
    out_dir = _prepare_out_dir(cfg, out_dir)
    scheme = cfg.modulation()
    ch = cfg.channel()
    if ch.max_delay > cfg.cp_samples:
        raise ValueError(
            f"max tap delay {ch.max_delay} exceeds the cyclic prefix ({cfg.cp_samples})"
        )
    m = cfg.roundtrip_subblocks
    if cfg.corrupt_side_info and m < 2:
        raise ValueError("side-information corruption needs at least two sub-blocks")
    plan = make_partition(
        cfg.n_subcarriers,
        m,
        cfg.partition,
        seed=cfg.partition_seed if cfg.partition == "pseudorandom" else None,
    )
    phases = PhaseFactorSet.of_order(cfg.phase_factors)
    oversampling = cfg.oversampling
    response = ch.frequency_response(cfg.n_subcarriers, oversampling)
    if np.any(np.abs(response) < 1e-9):
        raise ValueError("channel response has a spectral null; equalisation would blow up")

    bit_errors = 0
    n_bits = 0
    for trial in range(cfg.n_frames):
        rng = derive_rng(cfg.seed, trial)
        bits = rng.integers(0, 2, cfg.n_subcarriers * scheme.bits_per_symbol, dtype=np.uint8)
        frame = map_symbols(bits, scheme, cfg.n_subcarriers)

        if candidate_count(cfg.phase_factors, m) <= cfg.search_budget:
            result = pts_exhaustive(frame, plan, phases, oversampling, cfg.search_budget)
        else:
            result = pts_iterative_binary(frame, plan, oversampling)
        side_bits = result.side_info_bits.copy()
        if cfg.corrupt_side_info:
            side_bits[0] ^= 1

        tx_frame = apply_phase_rotation(frame, plan, result.phase_vector)
        tx = add_cyclic_prefix(
            ofdm_modulate(tx_frame, oversampling, cfg.sample_rate), cfg.cp_samples
        )
        rx = apply_channel(tx, ch, seed=derive_seed(cfg.channel_seed, trial))
        rx_body = remove_cyclic_prefix(rx, cfg.cp_samples)
        critical = TimeSignal(rx_body.samples[::oversampling], cfg.sample_rate / oversampling)
        rx_frame = ofdm_demodulate(critical, cfg.n_subcarriers)
        equalised = SymbolFrame(rx_frame.symbols / response, cfg.n_subcarriers)
        vector = decode_side_info(side_bits, m, phases)
        recovered = demap_symbols(receiver_derotate(equalised, plan, vector), scheme)

        bit_errors += int(np.count_nonzero(recovered != bits))
        n_bits += bits.size

    status = "pass" if bit_errors == 0 else "fail"
    report = {
        "n_frames": cfg.n_frames,
        "n_bits": n_bits,
        "bit_errors": bit_errors,
        "bit_error_rate": bit_errors / n_bits,
        "corrupt_side_info": cfg.corrupt_side_info,
        "status": status,
    }
    report_path = os.path.join(out_dir, "roundtrip_report.json")
    _write_json(report_path, report)
    manifest = _write_manifest(out_dir, "roundtrip", cfg, [report_path], {"status": status})
    return {**report, "report": report_path, "manifest": manifest}
