from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from collections.abc import Sequence
from dataclasses import replace
from functools import partial
from pathlib import Path
from typing import Optional, TextIO

from brt.config import ConfigError, RunConfig, Setup, load_config
from brt.estimators import (
    Diverged,
    Estimate,
    estimate_entropy_density,
    estimate_free_energy,
    estimate_u_in,
    estimate_v_in,
    hitting_intensity,
)
from brt.eventlog import LogHeader, read_log, replicate_path, write_log
from brt.render import RenderStyle, render_bars, render_svg
from brt.simulator import BranchingTessellation, BudgetExceeded, simulate
from brt.utils import fmt_float, log_level, map_replicates
from brt.validate import SUITES, run_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_CONFIG = 2
EXIT_BUDGET = 3
EXIT_DIVERGED = 4

FUNCTIONALS = ("h", "u", "v", "free", "intensity")


def _run_replicate(index: int, config: RunConfig, setup: Setup) -> BranchingTessellation:
    initial = config.initial_for(setup, index)
    return simulate(
        setup.window,
        initial,
        setup.kernel,
        setup.driving,
        config.t_end,
        config.streams().replicate(index),
        config.event_cap,
    )


def simulate_replicates(config: RunConfig, setup: Setup) -> list[BranchingTessellation]:
    fn = partial(_run_replicate, config=config, setup=setup)
    return map_replicates(fn, list(range(config.replicates)))


def _overrides(config: RunConfig, args: argparse.Namespace) -> RunConfig:
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "replicates", None) is not None:
        if args.replicates < 1:
            raise ConfigError("--replicates must be at least 1")
        config = replace(config, replicates=args.replicates)
    return config


def cmd_simulate(args: argparse.Namespace) -> int:
    config = _overrides(load_config(args.config), args)
    setup = config.build()
    out = args.out or config.output.get("log")
    if not out:
        raise ConfigError("no output path: pass --out or set output.log")
    histories = simulate_replicates(config, setup)
    for i, history in enumerate(histories):
        header = LogHeader(
            dimension=config.dimension,
            window=setup.window,
            colours=config.colours,
            seed=config.seed,
            kernel=config.kernel,
            driving=config.driving,
            t_end=config.t_end,
            replicate=i,
        )
        write_log(replicate_path(Path(out), i, len(histories)), history, header)
    return EXIT_OK


def _estimate_rows(
    config: RunConfig, setup: Setup, functional: str, target: Optional[dict]
) -> list[tuple[str, Estimate]]:
    if setup.scheme is None:
        raise ConfigError("estimation needs an 'observation' section")
    psi = config.target_kernel(setup, target)
    replicates = simulate_replicates(config, setup)
    streams = config.streams()
    scheme = setup.scheme
    if functional == "h":
        est = estimate_entropy_density(
            replicates, setup.kernel, setup.driving, scheme, streams, config.strata, config.n_mc
        )
        return [("h", est)]
    if functional == "u":
        return [("u", estimate_u_in(replicates, psi, scheme))]
    if functional == "v":
        est = estimate_v_in(
            replicates, psi, setup.driving, scheme, streams, config.n_mc, config.strata
        )
        return [("v", est)]
    if functional == "intensity":
        return [("intensity", hitting_intensity(replicates, scheme))]
    fe = estimate_free_energy(
        replicates, setup.kernel, psi, setup.driving, scheme, streams, config.strata, config.n_mc
    )
    return [
        ("free", fe.three_term),
        ("free_direct", fe.direct),
        ("h", fe.entropy),
        ("u", fe.energy),
        ("v", fe.pressure),
    ]


def write_csv(stream: TextIO, rows: Sequence[tuple[str, Estimate]]) -> None:
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["name", "value", "std_error", "n", "notes"])
    for name, est in rows:
        writer.writerow([name, fmt_float(est.value), fmt_float(est.std_error), est.n, est.notes])


def cmd_estimate(args: argparse.Namespace) -> int:
    config = _overrides(load_config(args.config), args)
    setup = config.build()
    target = None
    if args.target_kernel:
        try:
            target = json.loads(args.target_kernel)
        except json.JSONDecodeError as e:
            raise ConfigError(f"--target-kernel is not valid JSON: {e.msg}") from None
        if not isinstance(target, dict):
            raise ConfigError("--target-kernel must be a JSON object")
    rows = _estimate_rows(config, setup, args.functional, target)
    out = args.out or config.output.get("csv")
    if out:
        with open(out, "w", encoding="utf-8", newline="") as f:
            write_csv(f, rows)
    else:
        write_csv(sys.stdout, rows)
    return EXIT_OK


def cmd_render(args: argparse.Namespace) -> int:
    header, history = read_log(args.log)
    s = history.t_end if args.time is None else args.time
    if not 0.0 <= s <= 1.0:
        raise ConfigError("--time must lie in [0, 1]")
    state = history.state_at(s)
    style = RenderStyle(canvas=args.canvas, show_time=args.stamp)
    if header.dimension == 1:
        if not args.allow_1d:
            raise ConfigError("one-dimensional log: pass --allow-1d to draw a bar strip")
        svg = render_bars(state, style, s)
    else:
        svg = render_svg(state, style, s)
    Path(args.out).write_text(svg, encoding="utf-8")
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    results = run_suite(args.suite, scale=args.scale, seed=args.seed or 0)
    width = max(len(r.name) for r in results)
    for r in results:
        mark = "PASS" if r.passed else "FAIL"
        print(f"{mark}  {r.suite:<11}  {r.name:<{width}}  {r.detail}")
    return EXIT_OK if all(r.passed for r in results) else EXIT_VALIDATION


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="brt", description="Branching random tessellations")
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="simulate and write JSONL event logs")
    p.add_argument("config", type=Path)
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("estimate", help="Monte Carlo estimates as CSV")
    p.add_argument("config", type=Path)
    p.add_argument("--functional", choices=FUNCTIONALS, default="free")
    p.add_argument("--target-kernel", help="kernel fragment (JSON) used as target")
    p.add_argument("--seed", type=int)
    p.add_argument("--replicates", type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("render", help="draw one frame of an event log as SVG")
    p.add_argument("log", type=Path)
    p.add_argument("--time", type=float)
    p.add_argument("--out", type=Path, required=True)
    p.add_argument("--allow-1d", action="store_true")
    p.add_argument("--canvas", type=int, default=600)
    p.add_argument("--stamp", action="store_true", help="print the time on the frame")
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("validate", help="run acceptance suites")
    p.add_argument("--suite", choices=(*SUITES, "all"), default="all")
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else log_level(),
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except BudgetExceeded as e:
        print(f"brt: {e}", file=sys.stderr)
        return EXIT_BUDGET
    except Diverged as e:
        print(f"brt: {e}", file=sys.stderr)
        return EXIT_DIVERGED
    except OSError as e:
        print(f"brt: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except ValueError as e:
        print(f"brt: {e}", file=sys.stderr)
        return EXIT_CONFIG
