"""Command-line entry point: ``holorestore <subcommand> ...``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from holorestore import pipeline
from holorestore.patterns import load_binary_image, write_pgm, write_png


def _config(args) -> pipeline.ExperimentConfig:
    config = pipeline.load_config(args.config) if args.config else pipeline.ExperimentConfig()
    if args.seed is not None:
        config = config.with_seed(args.seed)
    return config


def cmd_gen_dataset(args):
    manifest = pipeline.gen_dataset(_config(args), Path(args.out) / "dataset")
    print(manifest)


def cmd_train(args):
    config = _config(args)
    dataset = Path(args.dataset) if args.dataset else Path(args.out) / "dataset"
    model, loss_csv = pipeline.train_cmd(dataset, config, args.out)
    print(model)
    print(loss_csv)


def cmd_restore(args):
    config = _config(args)
    out = Path(args.out) / (Path(args.image).stem + "_restored.pgm")
    restored, diff = pipeline.restore_cmd(args.model, args.image, config, out, reference=args.reference)
    print(restored)
    if diff is not None:
        print(diff)


def cmd_evaluate(args):
    out_csv = None
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        out_csv = Path(args.out) / "evaluation.csv"
    metrics = pipeline.evaluate_cmd(args.original, args.raw, args.restored, args.block_px, out_csv)
    sys.stdout.write(pipeline.format_report(metrics))


def cmd_run_all(args):
    print(pipeline.run_all(_config(args), args.out))


def cmd_simulate(args):
    """Record and reconstruct an external binary image (e.g. a QR code)."""
    config = _config(args)
    image = load_binary_image(args.image, args.threshold)
    recon = pipeline.simulate(image, config, [config.seed, 0, 2])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.image).stem
    for suffix, img in (("original", image), ("reconstruction", recon)):
        path = out / f"{stem}_{suffix}.pgm"
        write_pgm(path, img)
        if config.png:
            write_png(path.with_suffix(".png"), img)
        print(path)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="holorestore", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value experiment config file")
        p.add_argument("--seed", type=int, help="override the top-level seed")
        p.add_argument("--out", default="out", help="output directory (default: out)")
        return p

    p = common(sub.add_parser("gen-dataset", help="generate page data, holograms and reconstructions"))
    p.set_defaults(func=cmd_gen_dataset)

    p = common(sub.add_parser("train", help="train the autoencoder on a dataset"))
    p.add_argument("--dataset", help="dataset directory or manifest (default: OUT/dataset)")
    p.set_defaults(func=cmd_train)

    p = common(sub.add_parser("restore", help="restore a degraded reconstruction"))
    p.add_argument("model")
    p.add_argument("image")
    p.add_argument("--reference", help="clean image; also writes the difference image")
    p.set_defaults(func=cmd_restore)

    p = common(sub.add_parser("evaluate", help="MSE and bit-error rate of raw vs restored"))
    p.add_argument("original")
    p.add_argument("raw")
    p.add_argument("restored")
    p.add_argument("--block-px", type=int, default=10)
    p.set_defaults(func=cmd_evaluate, out=None)

    p = common(sub.add_parser("run-all", help="gen-dataset, train, restore and evaluate"))
    p.set_defaults(func=cmd_run_all)

    p = common(sub.add_parser("simulate", help="record and reconstruct an external binary image"))
    p.add_argument("image")
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        args.func(args)
    except (OSError, ValueError, ArithmeticError) as exc:
        print(f"holorestore: error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
