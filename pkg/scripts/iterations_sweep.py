"""Restoration quality after 5 vs 40 training epochs, plus the loss curve.

Runs at desk scale by default; pass --full for the 1000 x 1000 setup
(slow: expect tens of minutes).

    python scripts/iterations_sweep.py --out runs/sweep --images 19
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from holorestore import pipeline
from holorestore.patterns import bit_error_rate, read_image, write_png
from holorestore.autoencoder import restore, train


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/sweep")
    ap.add_argument("--images", type=int, default=19)
    ap.add_argument("--epochs", type=int, nargs="+", default=[5, 40])
    ap.add_argument("--dropout", type=float, default=0.8)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--full", action="store_true")
    args = ap.parse_args()

    make = pipeline.ExperimentConfig.full_scale if args.full else pipeline.ExperimentConfig
    cfg = make(n_train_images=args.images, n_eval_images=1, seed=args.seed)
    out = Path(args.out)
    manifest = pipeline.gen_dataset(cfg, out / "dataset")
    X, T = pipeline.load_training_pairs(manifest, cfg.tile_px)
    original, raw = (read_image(p) for p in _first_eval(manifest))
    print(f"{X.shape[0]} training subpatterns; raw BER {bit_error_rate(original, raw, cfg.page.block_px):.4f}")

    for epochs in args.epochs:
        tc = dataclasses.replace(cfg.train, epochs=epochs, dropout_rate=args.dropout)
        params, history = train(X, T, tc)
        restored = restore(params, raw, cfg.tile_px)
        m = pipeline.evaluate(original, raw, restored, cfg.page.block_px)
        pipeline.write_loss_csv(out / f"loss_{epochs}.csv", history)
        write_png(out / f"restored_{epochs}.png", restored)
        write_png(out / f"diff_{epochs}.png", np.abs(restored - original))
        print(f"epochs={epochs:3d} final loss {history[-1]:.3f}  mse {m['mse_restored']:.4f}  BER {m['ber_restored']:.4f}")


def _first_eval(manifest):
    _, entries = pipeline.read_manifest(manifest)
    e = next(e for e in entries if e.split == "eval")
    return e.original, e.reconstruction


if __name__ == "__main__":
    main()
