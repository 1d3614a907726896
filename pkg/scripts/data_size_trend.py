"""Held-out restoration error for 19- vs 99-image training sets over several seeds.

    python scripts/data_size_trend.py --seeds 0 1 2 --out runs/trend
"""

import argparse
import dataclasses
from pathlib import Path

import numpy as np

from holorestore import pipeline
from holorestore.autoencoder import load_params, restore


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--out", default="runs/trend")
    ap.add_argument("--sizes", type=int, nargs="+", default=[19, 99])
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2])
    ap.add_argument("--heldout", type=int, default=3)
    args = ap.parse_args()

    rows = []
    for seed in args.seeds:
        probe = pipeline.ExperimentConfig(n_train_images=max(args.sizes), seed=seed)
        heldout = [pipeline.make_pair(probe, "eval", j)[:2] for j in range(args.heldout)]
        for n in args.sizes:
            cfg = dataclasses.replace(probe, n_train_images=n, n_eval_images=0)
            out = Path(args.out) / f"seed{seed}_n{n}"
            model, _ = pipeline.train_cmd(pipeline.gen_dataset(cfg, out / "dataset"), cfg, out)
            params = load_params(model)
            scores = [pipeline.evaluate(o, r, restore(params, r, cfg.tile_px), cfg.page.block_px) for o, r in heldout]
            mse = np.mean([s["mse_restored"] for s in scores])
            ber = np.mean([s["ber_restored"] for s in scores])
            rows.append((seed, n, mse, ber))
            print(f"seed={seed} images={n:3d} subpatterns={cfg.subpattern_count():6d} mse={mse:.4f} ber={ber:.4f}")

    for n in args.sizes:
        print(f"images={n:3d} median mse {np.median([r[2] for r in rows if r[1] == n]):.4f}")


if __name__ == "__main__":
    main()
