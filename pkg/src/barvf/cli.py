"""Command-line entry point: ``barvf {run,sweep,rd-trace,describe}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from barvf.envs import ENV_NAMES, describe, make_env
from barvf.harness import DEFAULT_BETAS, ExperimentConfig, beta_sweep, run_experiment, summarize
from barvf.rate_distortion import BAConfig, read_distortion_csv, trace_solutions, write_rd_trace_csv

# CLI flag -> ExperimentConfig field
_RUN_FIELDS = {
    "env": "env_name",
    "agent": "agent",
    "beta": "beta",
    "z_samples": "z_samples",
    "episodes": "episodes",
    "seeds": "seeds",
    "out": "output_dir",
    "member_count": "member_count",
    "prior_scale": "prior_scale",
    "noise_scale": "noise_scale",
    "step_size": "step_size",
    "gamma": "gamma",
    "update_mode": "update_mode",
    "smoothing_window": "smoothing_window",
}


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _add_run_flags(p: argparse.ArgumentParser, with_agent: bool = True):
    # defaults stay None so that only flags given on the command line override --config
    p.add_argument("--config", type=Path, help="JSON file with ExperimentConfig fields")
    p.add_argument("--env", choices=ENV_NAMES)
    if with_agent:
        p.add_argument("--agent", choices=("baseline", "rvf", "ba-rvf"))
        p.add_argument("--beta", type=float)
    p.add_argument("--z-samples", type=int)
    p.add_argument("--episodes", type=int)
    p.add_argument("--seeds", type=_int_list, help="e.g. 0,1,2")
    p.add_argument("--out", help="output directory")
    p.add_argument("--member-count", type=int)
    p.add_argument("--prior-scale", type=float, help="default depends on the environment")
    p.add_argument("--noise-scale", type=float)
    p.add_argument("--step-size", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--update-mode", choices=("step", "episode"))
    p.add_argument("--smoothing-window", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barvf", description="Rate-distortion exploration experiments")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train one agent for every seed")
    _add_run_flags(run)

    sweep = sub.add_parser("sweep", help="train BA-RVF over a grid of beta values")
    _add_run_flags(sweep, with_agent=False)
    sweep.add_argument("--betas", type=_float_list, help="default: 1,10,...,1e6")

    rd = sub.add_parser("rd-trace", help="trace rate and distortion over beta for a distortion matrix")
    rd.add_argument("--matrix", type=Path, required=True, help="headerless Z x A distortion CSV")
    rd.add_argument("--betas", type=_float_list, required=True)
    rd.add_argument("--out", type=Path, required=True)
    rd.add_argument("--max-iter", type=int, default=200)
    rd.add_argument("--tol", type=float, default=1e-9)

    desc = sub.add_parser("describe", help="print an environment summary as JSON")
    desc.add_argument("--env", choices=ENV_NAMES, required=True)
    desc.add_argument("--out", type=Path, help="write JSON here instead of stdout")
    return parser


def config_from_args(args: argparse.Namespace, **forced) -> ExperimentConfig:
    data = {}
    if args.config is not None:
        data = ExperimentConfig.from_json(args.config).to_dict()
    for flag, name in _RUN_FIELDS.items():
        value = getattr(args, flag, None)
        if value is not None:
            data[name] = value
    data.update(forced)
    return ExperimentConfig.from_dict(data)


def _report(summary: dict):
    for g in summary["groups"]:
        beta = "-" if g["beta"] is None else format(g["beta"], "g")
        stats = g["final_return"]
        print(f"{g['agent']:<9} beta={beta:<7} final return {stats['mean']:.4f} +/- {stats['std']:.4f} "
              f"rate {g['final_rate']['mean']:.4g} nats")


def cmd_run(args) -> int:
    config = config_from_args(args)
    records = run_experiment(config)
    _report(summarize(records, config.smoothing_window))
    return 0


def cmd_sweep(args) -> int:
    betas = DEFAULT_BETAS if args.betas is None else args.betas
    if not betas:
        raise ValueError("--betas is empty")
    # the per-run beta is replaced for each grid point
    config = config_from_args(args, agent="ba-rvf", beta=float(betas[0]))
    _report(beta_sweep(config, betas))
    return 0


def cmd_rd_trace(args) -> int:
    d = read_distortion_csv(args.matrix)
    betas = sorted(set(args.betas))
    sols = trace_solutions(d, None, betas, BAConfig(max_iterations=args.max_iter, tolerance=args.tol))
    args.out.mkdir(parents=True, exist_ok=True)
    path = write_rd_trace_csv(sols, args.out / "rd_trace.csv")
    for s in sols:
        print(f"beta={s.beta:<10g} rate={s.rate:.6g} nats distortion={s.expected_distortion:.6g}")
    print(f"wrote {path}")
    return 0


def cmd_describe(args) -> int:
    text = json.dumps(describe(make_env(args.env)), indent=2)
    if args.out is None:
        print(text)
    else:
        args.out.write_text(text + "\n")
    return 0


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "rd-trace": cmd_rd_trace, "describe": cmd_describe}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError, RuntimeError) as exc:
        print(f"barvf {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
