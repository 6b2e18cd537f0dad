"""Command-line front end for the experiment harness.

Exit codes: 0 success, 1 validation error (including a failed round trip),
2 search-budget/overflow error, 3 I/O error, 70 unexpected internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import traceback

from .config import build_config, parse_config_file
from .harness import (
    run_ccdf_vs_n,
    run_oversampling_sweep,
    run_pts_sweep,
    run_roundtrip,
    run_time_domain,
)
from .metrics import PaprValue
from .power import make_power_report, power_report_json
from .pts import SearchBudgetError


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise argparse.ArgumentError(None, message)


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--seed", type=int, help="master seed (overrides the file)")
    parser.add_argument("--out", help="output directory (overrides the file)")
    parser.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config key; repeatable",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="uwaofdm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    for name, text in [
        ("time-domain", "render one seeded frame's envelope to CSV"),
        ("ccdf", "exceedance curves over subcarrier counts"),
        ("oversampling", "exceedance curves over oversampling factors"),
        ("pts-sweep", "peak-reduction sweep over sub-block counts"),
        ("roundtrip", "end-to-end transmit/receive bit comparison"),
    ]:
        _add_common(sub.add_parser(name, help=text))

    power = sub.add_parser("power-report", help="amplifier energy report for two peak ratios")
    _add_common(power)
    power.add_argument("--initial-db", type=float, required=True, help="peak ratio before reduction (dB)")
    power.add_argument("--final-db", type=float, required=True, help="peak ratio after reduction (dB)")
    return parser


def _config_from_args(args) -> "ExperimentConfig":
    file_values = parse_config_file(args.config) if args.config else {}
    overrides: dict = {}
    for item in args.set:
        if "=" not in item:
            raise ValueError(f"--set expects KEY=VALUE, got {item!r}")
        key, _, value = item.partition("=")
        overrides[key.strip()] = value.strip()
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    return build_config(file_values, overrides)


def _dispatch(args) -> int:
    cfg = _config_from_args(args)
    if args.command == "time-domain":
        result = run_time_domain(cfg)
        print(f"wrote {result['csv']} ({result['n_samples']} samples, peak ratio {result['papr_db']:.2f} dB)")
    elif args.command == "ccdf":
        result = run_ccdf_vs_n(cfg)
        for n, q in result["quantiles_db"].items():
            print(f"N={n}: quantile at level {cfg.ccdf_level:g} = {q:.2f} dB")
    elif args.command == "oversampling":
        result = run_oversampling_sweep(cfg)
        for factor, q in result["quantiles_db"].items():
            print(f"L={factor}: quantile at level {cfg.ccdf_level:g} = {q:.2f} dB")
    elif args.command == "pts-sweep":
        result = run_pts_sweep(cfg)
        print(f"baseline quantile: {result['baseline_quantile_db']:.2f} dB")
        for row in result["rows"]:
            print(
                f"M={row['n_subblocks']}: {row['quantile_db']:.2f} dB "
                f"({row['search_mode']}, {row['candidates']} candidates, "
                f"saving gain {row['saving_gain_db']:.2f})"
            )
    elif args.command == "power-report":
        report = make_power_report(
            cfg.p_out_avg_watts,
            PaprValue.from_db(args.initial_db),
            PaprValue.from_db(args.final_db),
        )
        payload = power_report_json(report)
        os.makedirs(cfg.out_dir, exist_ok=True)
        path = os.path.join(cfg.out_dir, "power_report.json")
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(json.dumps(payload, indent=2, sort_keys=True))
    elif args.command == "roundtrip":
        result = run_roundtrip(cfg)
        print(
            f"{result['n_frames']} frames, {result['n_bits']} bits, "
            f"{result['bit_errors']} bit errors -> {result['status']}"
        )
        if result["status"] != "pass":
            return 1
    else:  # pragma: no cover - argparse enforces the choices
        raise ValueError(f"unknown command {args.command!r}")
    return 0


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return _dispatch(args)
    except argparse.ArgumentError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (SearchBudgetError, OverflowError) as exc:
        print(f"budget error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 3
    except Exception:  # pragma: no cover - last-resort diagnostics
        traceback.print_exc()
        return 70


if __name__ == "__main__":
    raise SystemExit(main())
