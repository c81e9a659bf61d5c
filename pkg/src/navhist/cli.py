"""Command-line entry point: ``navhist <command> [flags]``.

Exit codes: 0 success, 1 runtime error, 2 usage error. Machine-readable
results go to stdout; status messages go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import sys
from typing import Sequence

from . import eqa
from .core import (
    SamplerConfig,
    TrajectoryFormatError,
    load_episodes,
    load_trajectory,
    save_episodes,
    save_sampled,
    save_trajectory,
)
from .metrics import summarize
from .posenc import PosEncConfig, encode_2d
from .sampler import redundancy_stats, sample_history
from .simulator import POLICIES, FeatureSynthConfig, bundled_trajectories, house_json, simulate
from .sweep import PAPER_GRID, SweepSpec, rows_to_csv, run_sweep

log = logging.getLogger("navhist")


def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _finite(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}") from None
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _nonneg(text: str) -> float:
    v = _finite(text)
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a value >= 0, got {v}")
    return v


def _unit_interval(text: str) -> float:
    v = _finite(text)
    if not -1.0 <= v <= 1.0:
        raise argparse.ArgumentTypeError(f"expected a value in [-1, 1], got {v}")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="navhist", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="generate a synthetic house and trajectory")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rooms", type=_positive_int, required=True)
    p.add_argument("--policy", choices=POLICIES, required=True)
    p.add_argument("--steps", type=_positive_int, required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--extent", type=_nonneg, default=8.0, help="house side length in metres")
    p.add_argument("--feat-dim", type=_positive_int, default=32)

    p = sub.add_parser("sample", help="run history sampling on a trajectory file")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--w", type=_positive_int, default=60)
    p.add_argument("--epsilon", type=_nonneg, default=0.1)
    p.add_argument("--tau", type=_unit_interval, default=0.95)
    p.add_argument("--compare-tokens", action="store_true",
                   help="compare raw tokens instead of the pooled vector")
    p.add_argument("--out", help="write the sampled history JSON here")
    p.add_argument("--plot", help="render a top-down selection figure to this path")

    p = sub.add_parser("sweep", help="grid sweep of W, epsilon, tau; CSV on stdout")
    p.add_argument("--in", dest="inp", nargs="+", help="trajectory files (default: bundled set)")
    p.add_argument("--w", type=_positive_int, nargs="+")
    p.add_argument("--epsilon", type=_nonneg, nargs="+")
    p.add_argument("--tau", type=_unit_interval, nargs="+")
    p.add_argument("--paper-grid", action="store_true",
                   help="use the 12 published (W, epsilon, tau) rows; the default when no lists are given")
    p.add_argument("--out", help="write CSV here instead of stdout")
    p.add_argument("--plot-dir", help="render sweep figures into this directory")

    p = sub.add_parser("metrics", help="SR, SEL and %%Rooms over episode summaries")
    p.add_argument("--in", dest="inp", required=True)

    p = sub.add_parser("posenc", help="print the 2D positional encoding as a JSON array")
    p.add_argument("--x", type=_finite, required=True)
    p.add_argument("--y", type=_finite, required=True)
    p.add_argument("--c", type=_positive_int, required=True)
    p.add_argument("--base", type=_finite, default=10000.0)

    p = sub.add_parser("eqa-pack", help="build an EQA pair from a trajectory's final frames")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--w", type=_positive_int, default=60)
    p.add_argument("--instruction", help="defaults to the trajectory's meta instruction")
    p.add_argument("--out", help="JSON-lines output file (overwritten)")
    p.add_argument("--retry-limit", type=int, help="defaults to EQA_RETRY_LIMIT or 3")
    return parser


def cmd_simulate(args: argparse.Namespace) -> int:
    fcfg = FeatureSynthConfig(feat_dim=args.feat_dim)
    house, traj, ep = simulate(args.seed, args.rooms, args.policy, args.steps, args.extent, fcfg)
    os.makedirs(args.out, exist_ok=True)
    save_trajectory(traj, os.path.join(args.out, "trajectory.jsonl"))
    save_episodes([ep], os.path.join(args.out, "episode.jsonl"))
    with open(os.path.join(args.out, "house.json"), "w", encoding="utf-8") as fh:
        fh.write(house_json(house) + "\n")
    log.info("wrote %d observations to %s", len(traj), args.out)
    return 0


def cmd_sample(args: argparse.Namespace) -> int:
    traj = load_trajectory(args.inp)
    cfg = SamplerConfig(args.w, args.epsilon, args.tau, pool_before_compare=not args.compare_tokens)
    hist = sample_history(traj, cfg)
    if args.out:
        save_sampled(hist, args.out)
    if args.plot:
        from .report import plot_selection

        plot_selection(traj, hist, args.plot)
    print(json.dumps(redundancy_stats(traj, hist).to_json()))
    return 0


def cmd_sweep(args: argparse.Namespace) -> int:
    if args.inp:
        trajs = [(os.path.basename(p), load_trajectory(p)) for p in args.inp]
    else:
        trajs = bundled_trajectories()
    if args.paper_grid or not (args.w or args.epsilon or args.tau):
        grid = list(PAPER_GRID)
    else:
        grid = SweepSpec(args.w or [60], args.epsilon or [0.1], args.tau or [0.95]).grid()
    rows = run_sweep(trajs, grid)
    text = rows_to_csv(rows)
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.plot_dir:
        from .report import plot_sweep

        for path in plot_sweep(rows, args.plot_dir):
            log.info("wrote %s", path)
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    print(json.dumps(summarize(load_episodes(args.inp))))
    return 0


def cmd_posenc(args: argparse.Namespace) -> int:
    cfg = PosEncConfig(args.c, args.base)
    print(json.dumps(encode_2d(args.x, args.y, cfg).tolist()))
    return 0


def cmd_eqa_pack(args: argparse.Namespace) -> int:
    traj = load_trajectory(args.inp)
    instruction = args.instruction or traj.meta.get("instruction")
    if not instruction:
        raise ValueError("no --instruction given and the trajectory has no meta instruction")
    frames = eqa.select_context(traj, args.w)
    prompt = eqa.build_prompt(instruction, frames)
    retry = args.retry_limit if args.retry_limit is not None else eqa.retry_limit_from_env()
    response = eqa.generate(prompt, eqa.client_from_env(), retry_limit=retry, meta=traj.meta)
    line = eqa.eqa_pair_line(eqa.eqa_pair(prompt, response))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(line + "\n")
    print(line)
    return 0


COMMANDS = {
    "simulate": cmd_simulate,
    "sample": cmd_sample,
    "sweep": cmd_sweep,
    "metrics": cmd_metrics,
    "posenc": cmd_posenc,
    "eqa-pack": cmd_eqa_pack,
}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return COMMANDS[args.command](args)
    except (OSError, ValueError, RuntimeError, TrajectoryFormatError) as exc:
        print(f"navhist {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
