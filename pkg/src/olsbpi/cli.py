"""Command-line entry point: ``olsbpi <command> [--config F] [--out D] [--seed S] [--quiet]``."""

import argparse
import logging
import sys

from .config import SEED_MAX, config_from_dict, load_config
from .errors import ConfigError, MissingABData, OlsbpiError
from .experiment import run_experiment
from .presets import PENDULUM_SETTINGS

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3
COMMANDS = {
    "solve": "model-based policy iteration against the Riccati oracle",
    "learn": "off-policy least-squares learning from one simulated trajectory",
    "simulate": "simulate the exploration cascade and write trajectories",
    "robust": "policy iteration under injected estimation errors",
    "bench-pendulum": "learning benchmark on the triple inverted pendulum",
}
BENCH_SEEDS = [0, 1, 2, 3, 4]

log = logging.getLogger("olsbpi")


def _seed(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}")
    if not 0 <= value <= SEED_MAX:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON experiment configuration")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--seed", type=_seed, help="run a single seed (overrides the config)")
    common.add_argument("--quiet", action="store_true", help="suppress progress output")
    parser = argparse.ArgumentParser(prog="olsbpi", parents=[common])
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, text in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=text, description=text,
                       argument_default=argparse.SUPPRESS)
    return parser


def bench_config():
    s = PENDULUM_SETTINGS
    return config_from_dict({
        "schema_version": 1,
        "algorithm": "learn",
        "model": {"preset": "triple-pendulum"},
        "sim": {"t_f": s["t_f"], "sigma_u": s["sigma_u"], "dt": s["dt"]},
        "olsbpi": {"N": s["N"], "s_f": s["s_f"]},
        "seeds": list(BENCH_SEEDS),
        "output_dir": "out/bench-pendulum",
    })


def _resolve(args):
    if args.command == "bench-pendulum":
        cfg = load_config(args.config) if args.config else bench_config()
        cfg.algorithm = "learn"
    else:
        if not args.config:
            raise ConfigError(f"{args.command} requires --config")
        cfg = load_config(args.config)
        cfg.algorithm = args.command
    if args.out:
        cfg.output_dir = args.out
    if args.seed is not None:
        cfg.seeds = [args.seed]
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s")
    try:
        cfg = _resolve(args)
    except (ConfigError, MissingABData) as err:
        print(f"olsbpi: configuration error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s with seeds %s into %s", cfg.algorithm, cfg.seeds, cfg.output_dir)
    try:
        result = run_experiment(cfg)
    except OlsbpiError as err:
        print(f"olsbpi: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_NUMERICAL
    for failure in result.summary["failures"]:
        print(f"olsbpi: {failure['error']}: {failure['message']} {failure['context']}",
              file=sys.stderr)
    log.info("wrote %s", ", ".join(result.files))
    return EXIT_NUMERICAL if result.failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
