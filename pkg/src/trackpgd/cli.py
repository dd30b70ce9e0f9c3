"""Command-line interface: ``trackpgd <subcommand> [options]``.

Exit codes: 0 success, 1 configuration/validation error, 2 runtime/attack error.
"""

import argparse
import json
import logging
import sys
from pathlib import Path

from .exceptions import ConfigError, IngestionError, InvalidInputError

log = logging.getLogger("trackpgd")

ATTACK_CHOICES = {"trackpgd": "trackpgd", "segpgd-obj": "segpgd_obj", "segpgd-bg": "segpgd_bg",
                  "bce-pgd": "bce_pgd", "none": "none"}
SIGN_CHOICES = {"asc": "ascend", "desc": "descend"}


def _shared(p):
    p.add_argument("--config", help="YAML benchmark configuration")
    p.add_argument("--seed", type=int, help="random seed")
    p.add_argument("--out", help="output file or directory")


def _attack_flags(p):
    p.add_argument("--attack", choices=sorted(ATTACK_CHOICES))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--alpha", type=float)
    p.add_argument("--iters", type=int)
    p.add_argument("--lambda1", type=float)
    p.add_argument("--lambda2", type=float)
    p.add_argument("--gamma", type=float)
    p.add_argument("--alpha-t", dest="alpha_t", type=float)
    p.add_argument("--step-sign", dest="step_sign", choices=sorted(SIGN_CHOICES))


def build_parser():
    parser = argparse.ArgumentParser(prog="trackpgd", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-toy", help="write synthetic sequences in the dataset layout")
    _shared(p)
    p.add_argument("--count", type=int, default=20)
    p.add_argument("--length", type=int, default=12)
    p.add_argument("--frame-size", type=int, default=32)

    p = sub.add_parser("train-toy", help="train the toy tracker and save its weights")
    _shared(p)
    p.add_argument("--data", help="dataset directory (default: generate synthetic data)")
    p.add_argument("--count", type=int, default=200)
    p.add_argument("--length", type=int, default=12)
    p.add_argument("--frame-size", type=int, default=32)
    p.add_argument("--epochs", type=int)

    p = sub.add_parser("attack", help="attack a dataset with one attack and write records")
    _shared(p)
    _attack_flags(p)
    p.add_argument("--weights", help="toy tracker weights file")
    p.add_argument("--data", help="dataset directory")

    p = sub.add_parser("eval", help="run the configured benchmark")
    _shared(p)
    _attack_flags(p)

    p = sub.add_parser("sweep", help="loss-coefficient sweep or loss ablation")
    _shared(p)
    _attack_flags(p)
    p.add_argument("--mode", choices=["table", "grid", "ablation"])

    p = sub.add_parser("plot", help="render figures from a benchmark output directory")
    _shared(p)
    p.add_argument("--report", help="benchmark output directory (default: config out)")
    return parser


def _overrides(args, cfg):
    attack = dict(cfg.get("attack", {}))
    for key in ("epsilon", "alpha", "iters", "lambda1", "lambda2", "gamma", "alpha_t"):
        if getattr(args, key, None) is not None:
            attack[key] = getattr(args, key)
    if getattr(args, "step_sign", None):
        attack["step_sign"] = SIGN_CHOICES[args.step_sign]
    cfg["attack"] = attack
    if getattr(args, "attack", None):
        cfg["attacks"] = [ATTACK_CHOICES[args.attack]]
    if args.seed is not None:
        cfg["seed"] = args.seed
    if args.out:
        cfg["out"] = args.out
    return cfg


def _raw_config(args):
    import yaml

    if not args.config:
        return {}
    try:
        cfg = yaml.safe_load(Path(args.config).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot load config {args.config}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("configuration must be a mapping")
    return cfg


def _print_reports(reports):
    for kind, rep in reports.items():
        print(f"{kind:12s} J={rep.mean_j} F={rep.mean_f} J&F={rep.mean_jf} "
              f"failures={rep.total_failures} robustness={rep.robustness}")


def cmd_gen_toy(args):
    from .harness.io import save_sequence
    from .toy import generate_toy_sequences

    out = Path(args.out or "data/toy")
    seqs = generate_toy_sequences(args.seed or 0, args.count, args.length, args.frame_size)
    for s in seqs:
        save_sequence(s, out)
    print(f"wrote {len(seqs)} sequences to {out}")


def cmd_train_toy(args):
    from .harness.io import load_dataset
    from .toy import ToyTracker, generate_toy_sequences

    seed = args.seed or 0
    seqs = (load_dataset(args.data) if args.data
            else generate_toy_sequences(seed, args.count, args.length, args.frame_size))
    params = {"seed": seed}
    if args.epochs is not None:
        params["epochs"] = args.epochs
    tracker = ToyTracker(**params).fit(seqs, verbose=args.verbose)
    out = Path(args.out or "toy_tracker.bin")
    tracker.save(out)
    print(f"saved weights to {out}")


def cmd_attack(args):
    from .harness.benchmark import run_benchmark

    cfg = _raw_config(args)
    if args.weights:
        cfg["tracker"] = {"weights": args.weights}
    if args.data:
        cfg["dataset"] = {"path": args.data}
    cfg = _overrides(args, cfg)
    if not args.attack and "attacks" not in cfg:
        cfg["attacks"] = ["trackpgd"]
    _print_reports(run_benchmark(cfg))


def cmd_eval(args):
    from .harness.benchmark import run_benchmark

    _print_reports(run_benchmark(_overrides(args, _raw_config(args))))


def cmd_sweep(args):
    from .harness.benchmark import sweep

    cfg = _overrides(args, _raw_config(args))
    cfg.pop("attacks", None)
    if args.mode:
        cfg["sweep"] = {**cfg.get("sweep", {}), "mode": args.mode}
    result = sweep(cfg)
    print(json.dumps({str(k): v for k, v in result.items()}, indent=2, default=str))


def cmd_plot(args):
    from .harness.plots import render_plots

    report = args.report or _raw_config(args).get("out")
    if not report:
        raise ConfigError("plot needs --report or a config with 'out'")
    paths = render_plots(report, args.out)
    print(f"wrote {len(paths)} figures")


COMMANDS = {"gen-toy": cmd_gen_toy, "train-toy": cmd_train_toy, "attack": cmd_attack,
            "eval": cmd_eval, "sweep": cmd_sweep, "plot": cmd_plot}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        COMMANDS[args.command](args)
    except (ConfigError, InvalidInputError, IngestionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
