"""Command line interface.

Subcommands: simulate (mobility run producing trace and event logs),
coverage (grid map of best spectral efficiency), fit (path loss model
fitting on synthetic or user data), codebook (beam table export).
Exit codes: 0 success, 1 validation error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from .antenna import ArrayGeometry, build_codebook, format_codebook_table
from .channel import LinkType, UseCase, lookup_path_loss_params
from .engine import (coverage_map, coverage_to_json, emit, format_coverage,
                     format_events, format_trace, run, trace_to_json)
from .measurements import PathLossSample, fit_path_loss, synthesize_path_loss_samples
from .scenario import BUNDLED_SCENARIOS, ScenarioError, load_scenario


def _common_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, default=None,
                   help="override the scenario's master seed")
    p.add_argument("--out", default=None, help="output file path")
    p.add_argument("--format", choices=("text", "json"), default="text",
                   help="output format (default text)")
    p.add_argument("--timestep", type=float, default=None,
                   help="override the simulation timestep in ms")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mmwsim",
        description="Millimeter-wave link and mobility simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a mobility scenario")
    sim.add_argument("scenario",
                     help=f"scenario file or bundled name ({', '.join(BUNDLED_SCENARIOS)})")
    sim.add_argument("--events", default=None,
                     help="event log path (default: <out>.events.txt)")
    _common_flags(sim)

    cov = sub.add_parser("coverage", help="compute a coverage map")
    cov.add_argument("scenario", help="scenario file or bundled name")
    cov.add_argument("--grid-step", type=float, default=1.0,
                     help="grid step in meters (default 1)")
    _common_flags(cov)

    fit = sub.add_parser("fit", help="fit the path loss model to samples")
    fit.add_argument("--data", default=None,
                     help="CSV with header distance_m,path_loss_db")
    fit.add_argument("--synthetic", action="store_true",
                     help="fit model-generated samples instead of a data file")
    fit.add_argument("--use-case", default="umi_street_canyon",
                     choices=[u.value for u in UseCase])
    fit.add_argument("--link-type", default="los", choices=["los", "nlos"])
    fit.add_argument("--carrier-ghz", type=float, default=29.0)
    fit.add_argument("--samples", type=int, default=500)
    _common_flags(fit)

    cbp = sub.add_parser("codebook", help="export a beam codebook table")
    cbp.add_argument("--rows", type=int, default=8)
    cbp.add_argument("--cols", type=int, default=16)
    cbp.add_argument("--levels", type=int, default=2)
    cbp.add_argument("--bits", type=int, default=4)
    cbp.add_argument("--sector-az", type=float, nargs=2, default=(-45.0, 45.0))
    cbp.add_argument("--sector-el", type=float, nargs=2, default=(-15.0, 15.0))
    _common_flags(cbp)
    return parser


def _cmd_simulate(args) -> int:
    s = load_scenario(args.scenario)
    if args.seed is not None:
        s.seed = args.seed
    if args.timestep is not None:
        s.timestep_ms = args.timestep
    result = run(s)
    out = args.out or "trace.txt"
    if args.format == "json":
        emit(trace_to_json(result.rows), out)
    else:
        emit(format_trace(result.rows), out)
    events_path = args.events or out + ".events.txt"
    emit(format_events(result.events), events_path)
    dl = result.delivered_megabits()
    print(f"{s.name}: {len(result.rows)} steps, {len(result.events)} events, "
          f"{dl:.0f} Mb delivered DL -> {out}")
    return 0


def _cmd_coverage(args) -> int:
    s = load_scenario(args.scenario)
    if args.seed is not None:
        s.seed = args.seed
    cm = coverage_map(s, args.grid_step)
    out = args.out or "coverage.txt"
    if args.format == "json":
        emit(coverage_to_json(cm), out)
    else:
        emit(format_coverage(cm), out)
    covered = float((cm.se_bps_hz >= 1.0).mean())
    print(f"{s.name}: {cm.se_bps_hz.size} grid points, "
          f"{100.0 * covered:.1f}% at >= 1 bps/Hz -> {out}")
    return 0


def _read_samples_csv(path: str) -> list[PathLossSample]:
    samples = []
    with open(path, "r", encoding="utf-8") as f:
        header = f.readline().strip().split(",")
        if header[:2] != ["distance_m", "path_loss_db"]:
            raise ScenarioError(
                f"{path}: expected header 'distance_m,path_loss_db', got '{','.join(header)}'")
        for ln, line in enumerate(f, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            try:
                samples.append(PathLossSample(float(parts[0]), float(parts[1])))
            except (IndexError, ValueError) as e:
                raise ScenarioError(f"{path}:{ln}: bad sample row ({e})") from None
    return samples


def _cmd_fit(args) -> int:
    if args.data is None and not args.synthetic:
        raise ScenarioError("fit: provide --data FILE or --synthetic")
    if args.data is not None:
        samples = _read_samples_csv(args.data)
        source = args.data
    else:
        params = lookup_path_loss_params(UseCase(args.use_case),
                                         LinkType(args.link_type), args.carrier_ghz)
        samples = synthesize_path_loss_samples(params, args.samples,
                                               args.seed if args.seed is not None else 0)
        source = (f"synthetic {params.use_case.value}/{params.link_type.value} "
                  f"(alpha={params.alpha}, sigma={params.sigma_x_db} dB)")
    fit = fit_path_loss(samples, args.carrier_ghz)
    lines = [f"samples: {len(samples)} from {source}",
             f"alpha_hat: {fit.alpha_hat:.4f}",
             f"sigma_hat_db: {fit.sigma_hat_db:.4f}"]
    text = "\n".join(lines) + "\n"
    if args.out:
        emit(text, args.out)
    sys.stdout.write(text)
    return 0


def _cmd_codebook(args) -> int:
    g = ArrayGeometry(rows=args.rows, cols=args.cols)
    cb = build_codebook(g, tuple(args.sector_az), tuple(args.sector_el),
                        levels=args.levels, n_bits=args.bits)
    table = format_codebook_table(cb)
    if args.out:
        emit(table, args.out)
        print(f"{sum(len(lv) for lv in cb.levels)} beams -> {args.out}")
    else:
        sys.stdout.write(table)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            return _cmd_simulate(args)
        if args.command == "coverage":
            return _cmd_coverage(args)
        if args.command == "fit":
            return _cmd_fit(args)
        if args.command == "codebook":
            return _cmd_codebook(args)
        return 2
    except (ScenarioError, FileNotFoundError, ValueError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except Exception as e:  # noqa: BLE001 - surface runtime faults as exit 2
        print(f"runtime error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
