"""Command-line frontend.

Subcommands map one-to-one onto the standard experiment set: a single
simulation point, the three sweep types (SNR, Doppler, starting threshold),
and the complexity benchmark. File config (JSON) is overridden by flags.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
import time
from pathlib import Path

from .exceptions import ConfigurationError, OtfsNomaError
from .simulation import (SimConfig, benchmark_complexity, export_results,
                         sweep)

__all__ = ["main", "load_config", "parse_and_run"]

_FIELD_NAMES = {f.name for f in dataclasses.fields(SimConfig)}

DEFAULT_SNR_VALUES = [0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 35.0, 40.0]
DEFAULT_DOPPLER_VALUES = [500.0, 1000.0, 1500.0, 2000.0, 2500.0]
DEFAULT_THRESHOLD_VALUES = [0.5, 1.0, 1.5, 2.0, 2.5, 3.0]


def load_config(path) -> SimConfig:
    """Load a JSON key-value config; keys must be SimConfig field names.

    An empty file (or empty object) yields the full default setup.
    """
    text = Path(path).read_text().strip()
    data = json.loads(text) if text else {}
    if not isinstance(data, dict):
        raise ConfigurationError(f"{path}: config must be a JSON object")
    unknown = set(data) - _FIELD_NAMES
    if unknown:
        raise ConfigurationError(
            f"{path}: unknown config keys: {', '.join(sorted(unknown))}")
    if "detectors" in data:
        data["detectors"] = tuple(data["detectors"])
    return SimConfig(**data)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="otfs-noma",
        description="2-user downlink power-domain OTFS-NOMA link simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--snr", type=float, help="User 1 average SNR in dB")
        p.add_argument("--trials", type=int, help="Monte Carlo frames per point")
        p.add_argument("--seed", type=int, help="master RNG seed")
        p.add_argument("--detector", choices=["proposed", "mmse-sic", "both"],
                       help="detector(s) to simulate")
        p.add_argument("--qam", type=int, choices=[4, 16, 64],
                       help="QAM order for both users")
        p.add_argument("--speed-kmh", type=float, help="user velocity in km/h")
        p.add_argument("--workers", type=int, help="parallel worker processes")
        p.add_argument("--out", help="output CSV path")
        p.add_argument("--dry-run", action="store_true",
                       help="print the resolved config and exit")

    p = sub.add_parser("simulate", help="run a single simulation point")
    add_common(p)

    p = sub.add_parser("sweep-snr", help="SER vs SNR sweep")
    add_common(p)
    p.add_argument("--values", help="comma-separated User 1 SNRs in dB")

    p = sub.add_parser("sweep-doppler",
                       help="SER vs maximum Doppler shift sweep")
    add_common(p)
    p.add_argument("--values", help="comma-separated max Doppler shifts in Hz")

    p = sub.add_parser("sweep-threshold",
                       help="User 2 SER vs User 1 starting threshold sweep")
    add_common(p)
    p.add_argument("--values",
                   help="comma-separated starting thresholds (units of d1)")

    p = sub.add_parser("bench", help="complexity benchmark")
    p.add_argument("--sizes", default="16x16,64x16,256x16",
                   help="comma-separated MxN grid sizes")
    p.add_argument("--dense-max-mn", type=int, default=1024)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output JSON path")

    return parser


def _apply_overrides(cfg: SimConfig, args) -> SimConfig:
    updates = {}
    if args.snr is not None:
        updates["snr1_db"] = args.snr
        updates["snr2_db"] = None
    if args.trials is not None:
        updates["trials"] = args.trials
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.detector is not None:
        updates["detectors"] = (("proposed", "mmse-sic")
                                if args.detector == "both"
                                else (args.detector,))
    if args.qam is not None:
        updates["qam_order_1"] = args.qam
        updates["qam_order_2"] = args.qam
    if args.speed_kmh is not None:
        updates["speed_kmh"] = args.speed_kmh
        updates["doppler_hz"] = None
    if args.workers is not None:
        updates["workers"] = args.workers
    return dataclasses.replace(cfg, **updates) if updates else cfg


def _default_out(command: str) -> Path:
    out_dir = Path(os.environ.get("OTFS_NOMA_RESULTS_DIR", "results"))
    stamp = time.strftime("%Y%m%d-%H%M%S")
    return out_dir / f"{command}-{stamp}.csv"


def _parse_values(text: str, name: str) -> list:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigurationError(f"invalid {name} list: {text!r}") from None


# Sweep-specific defaults, mirroring the standard experiment setups.
_SWEEP_DEFAULTS = {
    "sweep-doppler": {"snr1_db": 20.0, "snr2_db": 35.0,
                      "qam_order_1": 16, "qam_order_2": 16},
    "sweep-threshold": {"snr1_db": 20.0, "snr2_db": 35.0,
                        "qam_order_1": 16, "qam_order_2": 16,
                        "detectors": ("proposed",)},
}


def parse_and_run(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)

    try:
        if args.command == "bench":
            return _run_bench(args)

        cfg = load_config(args.config) if args.config else SimConfig()
        if args.config is None and args.command in _SWEEP_DEFAULTS:
            cfg = dataclasses.replace(cfg, **_SWEEP_DEFAULTS[args.command])
        cfg = _apply_overrides(cfg, args)

        if args.command == "simulate":
            axis, values = "snr", [cfg.snr1_db]
        elif args.command == "sweep-snr":
            axis = "snr"
            values = (_parse_values(args.values, "SNR")
                      if args.values else DEFAULT_SNR_VALUES)
        elif args.command == "sweep-doppler":
            axis = "doppler"
            values = (_parse_values(args.values, "Doppler")
                      if args.values else DEFAULT_DOPPLER_VALUES)
        else:
            axis = "threshold"
            values = (_parse_values(args.values, "threshold")
                      if args.values else DEFAULT_THRESHOLD_VALUES)

        # Validate derived parameters up front so --dry-run catches mistakes.
        cfg.resolved_n_cp()
        cfg.allocation()

        if args.dry_run:
            resolved = dataclasses.asdict(cfg)
            resolved["detectors"] = list(cfg.detectors)
            resolved["resolved_n_cp"] = cfg.resolved_n_cp()
            resolved["resolved_snr2_db"] = cfg.resolved_snr2_db()
            resolved["max_doppler_hz"] = cfg.max_doppler_hz()
            resolved["sweep_axis"] = axis
            resolved["sweep_values"] = values
            print(json.dumps(resolved, indent=2))
            return 0

        out = Path(args.out) if args.out else _default_out(args.command)
        result = sweep(cfg, axis, values)
        export_results(result, out)
        print(f"wrote {out} and {out.with_suffix('.json')}")
        return 0

    except (OtfsNomaError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def _run_bench(args) -> int:
    try:
        sizes = []
        for token in args.sizes.split(","):
            m, n = token.lower().split("x")
            sizes.append((int(m), int(n)))
    except ValueError:
        print(f"error: invalid --sizes value {args.sizes!r}", file=sys.stderr)
        return 1
    try:
        table = benchmark_complexity(sizes, dense_max_mn=args.dense_max_mn,
                                     seed=args.seed)
        for entry in table["points"]:
            mmse = entry.get("mmse_s")
            print(f"M={entry['m']:4d} N={entry['n']:3d} MN={entry['mn']:6d}  "
                  f"proposed {entry['proposed_s']*1e3:9.2f} ms  "
                  + (f"mmse {mmse*1e3:9.2f} ms" if mmse is not None else
                     "mmse        --"))
        print(f"proposed log-log exponent: {table['proposed_exponent']:.3f}")
        if table["mmse_exponent"] is not None:
            print(f"mmse     log-log exponent: {table['mmse_exponent']:.3f}")
        out = Path(args.out) if args.out else \
            _default_out("bench").with_suffix(".json")
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(table, indent=2) + "\n")
        print(f"wrote {out}")
        return 0
    except (OtfsNomaError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(parse_and_run())


if __name__ == "__main__":
    main()
