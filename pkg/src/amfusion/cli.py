"""Command-line entry points: train, fuse, eval, synth."""

import argparse
import sys

from .data import FusionConfig, load_config
from .errors import FusionError
from .synth import write_dataset
from .trainer import TrainSchedule, evaluate, fuse, train


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="amfusion",
        description="Adaptive multi-scale infrared/visible image fusion.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train on a paired dataset")
    p_train.add_argument("--data", required=True, help="dataset directory")
    p_train.add_argument("--config", help="flat key=value config file")
    p_train.add_argument("--out", required=True, help="output directory")
    p_train.add_argument(
        "--scale",
        choices=("paper", "desk"),
        default="paper",
        help="training schedule preset (default: paper)",
    )
    p_train.add_argument("--seed", type=int, default=0)

    p_fuse = sub.add_parser("fuse", help="fuse one visible/infrared pair")
    p_fuse.add_argument("--ckpt", required=True)
    p_fuse.add_argument("--vis", required=True)
    p_fuse.add_argument("--ir", required=True)
    p_fuse.add_argument("--out", required=True)

    p_eval = sub.add_parser("eval", help="metric table over a dataset")
    p_eval.add_argument("--ckpt", required=True)
    p_eval.add_argument("--data", required=True)
    p_eval.add_argument("--out", required=True, help="output CSV path")

    p_synth = sub.add_parser("synth", help="write a synthetic paired dataset")
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--size", type=int, required=True)
    p_synth.add_argument("--seed", type=int, required=True)
    p_synth.add_argument("--out", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            config = load_config(args.config) if args.config else FusionConfig()
            schedule = TrainSchedule.desk() if args.scale == "desk" else TrainSchedule.paper()
            checkpoint = train(args.data, config, schedule, args.out, seed=args.seed)
            print(f"trained {checkpoint.global_step} steps -> {args.out}")
        elif args.command == "fuse":
            fuse(args.ckpt, args.vis, args.ir, args.out)
            print(f"wrote {args.out}")
        elif args.command == "eval":
            rows = evaluate(args.ckpt, args.data, args.out)
            _, mean = rows[-1]
            print(
                f"{len(rows) - 1} images -> {args.out} "
                f"(mean en={mean.en:.4f} mi={mean.mi:.4f} sd={mean.sd:.4f})"
            )
        elif args.command == "synth":
            ids = write_dataset(args.out, args.n, args.size, args.seed)
            print(f"wrote {len(ids)} pairs to {args.out}")
    except FusionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
