"""
CLI for the DPS-QKD simulator.

Usage:
    uv run python -m scripts.qkd_cli simulate --config configs/default.yaml --out runs/default
    uv run python -m scripts.qkd_cli sweep --axis distance --range 0:105:5
    uv run python -m scripts.qkd_cli sweep --axis guard_time --range 0:400ps:50ps --mc --pulses 200000
    uv run python -m scripts.qkd_cli attack-report --n-bins 2 3 4
    uv run python -m scripts.qkd_cli budget --config configs/default.yaml
    uv run python -m scripts.qkd_cli fit --point 30:21000 --point 105:2000 --fit-attenuation

Exit codes: 0 success, 2 configuration error, 3 empty result.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from dataclasses import replace
from pathlib import Path

from scripts.data_formats import (
    ATTACK_REPORT_SCHEMA,
    FIT_SCHEMA,
    SIFTED_KEY_SCHEMA,
    get_format_for_name,
    sweep_schema,
    table_to_csv_text,
    write_table,
)
from scripts.qkd.analytics import (
    SWEEP_AXES,
    REFERENCE_BUDGETS,
    error_budget_total,
    fit_insertion_loss,
    model_error_budget,
    rate_params_from_config,
    sweep,
    sweep_columns,
)
from scripts.qkd.attacks import IrAttackConfig, ir_qber_enumerated, ir_qber_exact
from scripts.qkd.errors import ConfigurationError, EmptyResultError
from scripts.qkd.protocol import export_rows, ideal_config, run_session, session_summary, sift, with_n_bins
from scripts.qkd_cli.config import ResolvedConfig, config_to_mapping, load_config, parse_quantity
from scripts.qkd_cli.manifest import RunManifest, dump_json, write_manifest

logger = logging.getLogger(__name__)

EXIT_CONFIG = 2
EXIT_EMPTY = 3

# Display unit of bare numbers in --range, per axis
RANGE_UNITS: dict[str, tuple[str | None, float]] = {
    "distance": ("length", 1.0),
    "guard_time": ("time", 1e-12),
    "gate_delay": ("time", 1e-9),
    "n_bins": (None, 1.0),
    "mu": (None, 1.0),
}

ATTACK_REPORT_PULSES = 2_000_000


def parse_range(text: str, axis: str) -> list[float]:
    """Parse "start:stop[:step]" (stop inclusive) into SI values for ``axis``.

    Bare numbers are read in the axis' display unit (km, ps, ns); values may
    also carry their own unit, e.g. "0:400ps:50ps".

    Raises:
        ConfigurationError: On malformed input, a non-positive step or an empty range.
    """
    dimension, bare_factor = RANGE_UNITS[axis]
    parts = [p.strip() for p in text.split(":")]
    if len(parts) not in (2, 3) or not all(parts):
        raise ConfigurationError(f"expected start:stop[:step], got {text!r}", "range")

    def value(part: str) -> float:
        try:
            return float(part) * bare_factor
        except ValueError:
            if dimension is None:
                raise ConfigurationError(f"{part!r} is not a number", "range") from None
            return parse_quantity(part, dimension, "range")

    start, stop = value(parts[0]), value(parts[1])
    step = value(parts[2]) if len(parts) == 3 else bare_factor
    if not step > 0:
        raise ConfigurationError("step must be > 0", "range")
    if stop < start:
        raise ConfigurationError(f"range {text!r} is empty", "range")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + i * step for i in range(count)]


def _resolve(args: argparse.Namespace) -> ResolvedConfig:
    resolved = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.pulses is not None:
        overrides["n_pulses"] = args.pulses
    if overrides:
        resolved = replace(resolved, session=replace(resolved.session, **overrides))
    return resolved


def _manifest(args: argparse.Namespace, resolved: ResolvedConfig, outputs: list[str], **arguments) -> RunManifest:
    return RunManifest(
        command=args.command,
        config_path=args.config,
        config=config_to_mapping(resolved),
        seed=resolved.session.seed,
        output_dir=str(args.out),
        arguments=arguments,
        outputs=outputs,
    )


def cmd_simulate(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    cfg = resolved.session
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    print(f"Simulating {cfg.n_pulses:,} pulses (N={cfg.source.n_bins}, L={cfg.channel.length_km} km, seed={cfg.seed})")
    record = run_session(cfg)
    key = sift(record)

    fmt = get_format_for_name(args.format)
    session_file = f"session{fmt.supported_extensions[0]}"
    fmt.write(str(out / session_file), export_rows(record))
    write_table(
        [
            {"pulse_index": p, "diff_index": d, "alice_bit": a, "bob_bit": b}
            for p, d, b, a in key.pairs
        ],
        SIFTED_KEY_SCHEMA,
        str(out / "sifted_key.csv"),
    )
    summary = session_summary(record, key)
    dump_json(summary, out / "summary.json")
    write_manifest(
        out,
        _manifest(args, resolved, [session_file, "sifted_key.csv", "summary.json"], format=args.format),
    )

    print(f"Clicks: {record.n_clicks:,}")
    print(f"Sifted bits: {len(key):,}")
    d = key.discards
    print(f"Discarded: {d.edge:,} edge, {d.guard:,} guard, {d.unassigned:,} unassigned")
    print(f"Discard fraction (guard): {summary['discard_fraction']:.4f}")
    print(f"Sifted rate: {summary['sifted_rate_bps']:.1f} bits/s")
    if len(key) == 0:
        raise EmptyResultError("no sifted bits; check the channel loss, efficiency and gate settings")
    print(f"QBER: {key.qber():.4f}")
    print(f"Output written to: {out}")
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    values = parse_range(args.range, args.axis)
    mc_pulses = None
    if args.mc:
        mc_pulses = args.pulses if args.pulses is not None else resolved.session.n_pulses
    rows = sweep(
        args.axis,
        values,
        resolved.session,
        shrinking=resolved.shrinking,
        ec_inefficiency=resolved.ec_inefficiency,
        mc_pulses=mc_pulses,
        workers=args.workers,
    )
    schema = sweep_schema(sweep_columns(args.axis, mc_pulses is not None))
    text = table_to_csv_text(rows, schema)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "sweep.csv").write_text(text, encoding="utf-8")
        write_manifest(
            out,
            _manifest(args, resolved, ["sweep.csv"], axis=args.axis, range=args.range, mc=args.mc),
        )
    sys.stdout.write(text)
    return 0


def cmd_attack_report(args: argparse.Namespace) -> int:
    if not args.n_bins:
        raise ConfigurationError("at least one N is required", "n_bins")
    if any(n < 2 for n in args.n_bins):
        raise ConfigurationError("every N must be >= 2", "n_bins")
    resolved = _resolve(args)
    base = resolved.session
    attack = base.attack if isinstance(base.attack, IrAttackConfig) else IrAttackConfig()
    pulses = args.pulses if args.pulses is not None else ATTACK_REPORT_PULSES

    rows = []
    for n_bins in args.n_bins:
        row = {
            "n_bins": n_bins,
            "qber_exact": ir_qber_exact(n_bins),
            "qber_enumerated": ir_qber_enumerated(n_bins) if n_bins <= 8 else math.nan,
            "qber_mc": math.nan,
            "qber_mc_se": math.nan,
            "sifted_bits": 0,
        }
        if args.mc:
            cfg = ideal_config(with_n_bins(base, n_bins), lossless=True)
            cfg = replace(cfg, attack=attack, n_pulses=pulses, fixed_pattern=None)
            key = sift(run_session(cfg))
            if len(key):
                q = key.qber()
                row.update(qber_mc=q, qber_mc_se=math.sqrt(q * (1 - q) / len(key)), sifted_bits=len(key))
        rows.append(row)

    text = table_to_csv_text(rows, ATTACK_REPORT_SCHEMA)
    if args.out is not None:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "attack_report.csv").write_text(text, encoding="utf-8")
        write_manifest(
            out,
            _manifest(args, resolved, ["attack_report.csv"], n_bins=list(args.n_bins), pulses=pulses, mc=args.mc),
        )
    sys.stdout.write(text)
    return 0


def _print_budget(title: str, entries: list[tuple[str, float]], total: float) -> None:
    print(title)
    for label, value in entries:
        print(f"  {label:<18} {100 * value:6.2f} %")
    print(f"  {'total':<18} {100 * total:6.2f} %")


def cmd_budget(args: argparse.Namespace) -> int:
    for name, budget in REFERENCE_BUDGETS.items():
        _print_budget(f"Reference budget, bin width {name}:", budget.entries(), error_budget_total(budget))
        print()
    if args.config is not None:
        resolved = _resolve(args)
        budget = model_error_budget(resolved.session)
        _print_budget(f"Model budget for {args.config}:", budget.entries(), error_budget_total(budget))
    return 0


def _parse_point(text: str) -> tuple[float, float]:
    try:
        length, rate = text.split(":")
        return float(length), float(rate)
    except ValueError:
        raise ConfigurationError(f"expected LENGTH_KM:RATE_BPS, got {text!r}", "point") from None


def cmd_fit(args: argparse.Namespace) -> int:
    resolved = _resolve(args)
    points = [_parse_point(p) for p in args.point]
    fit = fit_insertion_loss(points, rate_params_from_config(resolved.session), args.fit_attenuation)
    print(f"Insertion loss I_L: {fit.insertion_loss_db:.4f} dB (includes coupler and sifting loss)")
    print(f"Attenuation alpha: {fit.attenuation_db_per_km:.4f} dB/km")
    rows = [
        {"length_km": length, "measured_bps": rate, "model_bps": fit.predict(length)}
        for length, rate in points
    ]
    sys.stdout.write(table_to_csv_text(rows, FIT_SCHEMA))
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", default=None, help="YAML configuration file (default: built-in defaults)")
    common.add_argument("--seed", type=int, default=None, help="Master seed, overrides session.seed")
    common.add_argument("--pulses", type=int, default=None, help="Pulses per Monte-Carlo run, overrides session.n_pulses")
    common.add_argument(
        "--verbosity",
        choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        default="WARNING",
        help="Logging verbosity (default: WARNING)",
    )

    parser = argparse.ArgumentParser(
        prog="qkd_cli",
        description="Simulate M-state DPS-QKD with a single time-multiplexed detector.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common], help="Run one session and write its outputs")
    p.add_argument("--out", default="runs/simulate", help="Output directory (default: runs/simulate)")
    p.add_argument("--format", choices=["csv", "parquet"], default="csv", help="Click export format (default: csv)")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", parents=[common], help="Sweep one parameter, print a CSV table")
    p.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    p.add_argument("--range", required=True, help="start:stop[:step], stop inclusive, e.g. 0:105:5 or 0:400ps:50ps")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--mc", dest="mc", action="store_true", help="Add Monte-Carlo columns")
    mode.add_argument("--analytic", dest="mc", action="store_false", help="Analytic columns only (default)")
    p.add_argument("--workers", type=int, default=1, help="Worker processes for Monte-Carlo points")
    p.add_argument("--out", default=None, help="Also write sweep.csv and a manifest here")
    p.set_defaults(func=cmd_sweep, mc=False)

    p = sub.add_parser("attack-report", parents=[common], help="Intercept-resend QBER versus N")
    p.add_argument("--n-bins", type=int, nargs="*", default=[2, 3, 4], help="Values of N (default: 2 3 4)")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--mc", dest="mc", action="store_true", help="Include Monte-Carlo estimates (default)")
    mode.add_argument("--analytic", dest="mc", action="store_false", help="Closed form and enumeration only")
    p.add_argument("--out", default=None, help="Also write attack_report.csv and a manifest here")
    p.set_defaults(func=cmd_attack_report, mc=True)

    p = sub.add_parser("budget", parents=[common], help="Print the error budgets")
    p.set_defaults(func=cmd_budget)

    p = sub.add_parser("fit", parents=[common], help="Fit the insertion loss to measured sifted rates")
    p.add_argument("--point", action="append", required=True, help="LENGTH_KM:RATE_BPS, repeatable")
    p.add_argument("--fit-attenuation", action="store_true", help="Fit alpha as well (needs two distances)")
    p.set_defaults(func=cmd_fit)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=args.verbosity,
        format="%(asctime)s [%(levelname)s] [%(name)s] %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
    )
    try:
        return args.func(args)
    except ConfigurationError as e:
        print(f"Configuration error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyResultError as e:
        print(f"Empty result: {e}", file=sys.stderr)
        return EXIT_EMPTY


if __name__ == "__main__":
    sys.exit(main())
