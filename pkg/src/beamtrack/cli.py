"""Command-line entry point: simulate / sweep / cpi subcommands."""

from __future__ import annotations

import argparse
import sys

from .config import ScenarioConfig
from .harness import SWEEP_AXES, run_experiment, sweep
from .metrics import cpi_calculator


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", required=True, help="scenario file (.json or .toml)")
    parser.add_argument("--seed", type=int, default=None, help="master seed override")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument("--workers", type=int, default=1, help="parallel trial workers")
    parser.add_argument(
        "--subsample-data",
        type=int,
        default=None,
        help="data symbols simulated per measured FT-CPI (caps at n_s)",
    )


def _load_config(args: argparse.Namespace) -> ScenarioConfig:
    config = ScenarioConfig.from_file(args.config)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.subsample_data is not None:
        updates["data_subsample"] = args.subsample_data
    if updates:
        d = config.to_dict()
        d.update(updates)
        config = ScenarioConfig.from_dict(d)
    return config


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="beamtrack",
        description=(
            "Monte-Carlo simulator for per-cluster channel estimation, beam "
            "tracking, and statistical beamforming in time-varying multi-"
            "cluster massive MIMO uplinks."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one experiment")
    _add_common(p_sim)

    p_sweep = sub.add_parser("sweep", help="run one experiment per axis value")
    _add_common(p_sweep)
    p_sweep.add_argument("--axis", required=True, choices=SWEEP_AXES)
    p_sweep.add_argument(
        "--values", required=True, help="comma-separated axis values"
    )

    p_cpi = sub.add_parser("cpi", help="print coherence-interval budget numbers")
    p_cpi.add_argument("--fc-over-w", type=float, required=True)
    p_cpi.add_argument("--speed", type=float, required=True, help="m/s")
    p_cpi.add_argument("--d-over-lambda", type=float, required=True)
    p_cpi.add_argument("--antennas", type=int, required=True)

    args = parser.parse_args(argv)

    if args.command == "cpi":
        symbols, ftcpis = cpi_calculator(
            args.fc_over_w, args.speed, args.d_over_lambda, args.antennas
        )
        print(f"symbols_per_ftcpi {symbols:g}")
        print(f"ftcpis_per_stcpi {ftcpis:g}")
        return 0

    config = _load_config(args)
    if args.command == "simulate":
        run_experiment(config, workers=args.workers, out_dir=args.out)
        print(f"wrote results to {args.out}")
        return 0

    values = [float(v) for v in args.values.split(",") if v.strip() != ""]
    if not values:
        print("empty sweep: nothing to run (config echo only)", file=sys.stderr)
    sweep(config, args.axis, values, workers=args.workers, out_dir=args.out)
    print(f"wrote sweep results to {args.out}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
