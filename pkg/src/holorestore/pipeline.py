"""Experiment orchestration: dataset generation, training, restoration, evaluation.

All artifacts are plain files: 16-bit P5 graymaps for images, the ``HRAE``
binary model, ``epoch,mean_loss`` CSV and a tab-separated manifest.
"""

from __future__ import annotations

import csv
import dataclasses
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from holorestore import autoencoder as ae
from holorestore.optics import OpticalConfig, simulate_reconstruction
from holorestore.patterns import (
    PageDataSpec,
    bit_error_rate,
    generate_page_data,
    read_image,
    write_pgm,
    write_png,
)
from holorestore.tiling import subpattern_pairs

log = logging.getLogger(__name__)

NORMALIZATIONS = ("per-image-max", "global-constant")
MANIFEST_NAME = "manifest.tsv"
MANIFEST_COLUMNS = ("split", "index", "page_seed", "phase_seed", "original", "reconstruction")
METRIC_FIELDS = ("mse_raw", "mse_restored", "ber_raw", "ber_restored")


@dataclass(frozen=True)
class ExperimentConfig:
    optical: OpticalConfig = field(default_factory=lambda: OpticalConfig(200, 200))
    page: PageDataSpec = field(default_factory=lambda: PageDataSpec(20, 20, 10))
    tile_px: int = 20
    train: ae.TrainConfig = field(default_factory=ae.TrainConfig)
    n_train_images: int = 19
    n_eval_images: int = 1
    normalization: str = "per-image-max"
    norm_constant: float = 1.0
    seed: int = 0
    png: bool = False

    def __post_init__(self):
        if self.page.shape != self.optical.shape:
            raise ValueError(
                f"page data {self.page.shape} does not match optical grid {self.optical.shape}"
            )
        h, w = self.optical.shape
        if self.tile_px < 1 or h % self.tile_px or w % self.tile_px:
            raise ValueError(f"optical grid {self.optical.shape} not divisible by tile_px {self.tile_px}")
        if self.n_train_images < 1:
            raise ValueError("n_train_images must be >= 1")
        if self.n_eval_images < 0:
            raise ValueError("n_eval_images must be >= 0")
        if self.normalization not in NORMALIZATIONS:
            raise ValueError(f"normalization must be one of {NORMALIZATIONS}")
        if not self.norm_constant > 0:
            raise ValueError("norm_constant must be positive")
        # one top-level seed drives every random choice, training included
        if self.train.seed != self.seed:
            object.__setattr__(self, "train", dataclasses.replace(self.train, seed=self.seed))

    @classmethod
    def full_scale(cls, **overrides) -> "ExperimentConfig":
        """The 1000 x 1000 page-data setup: 100 x 100 blocks of 10 px, 20 px tiles."""
        return cls(optical=OpticalConfig(), page=PageDataSpec(100, 100, 10), **overrides)

    @property
    def tiles_per_image(self) -> int:
        h, w = self.optical.shape
        return (h // self.tile_px) * (w // self.tile_px)

    def subpattern_count(self, n_images: int | None = None) -> int:
        n = self.n_train_images if n_images is None else n_images
        return n * self.tiles_per_image

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return dataclasses.replace(self, seed=seed)


# -- config files ----------------------------------------------------------

# key -> (section or None for top level, converter)
_KEYS = {
    "pixels_x": ("optical", int),
    "pixels_y": ("optical", int),
    "pitch": ("optical", float),
    "wavelength": ("optical", float),
    "distance_z": ("optical", float),
    "pad": ("optical", "bool"),
    "blocks_x": ("page", int),
    "blocks_y": ("page", int),
    "block_px": ("page", int),
    "n_hidden": ("train", int),
    "batch_size": ("train", int),
    "dropout_rate": ("train", float),
    "epochs": ("train", int),
    "alpha": ("adam", float),
    "beta1": ("adam", float),
    "beta2": ("adam", float),
    "epsilon": ("adam", float),
    "tile_px": (None, int),
    "n_train_images": (None, int),
    "n_eval_images": (None, int),
    "normalization": (None, str),
    "norm_constant": (None, float),
    "seed": (None, int),
    "png": (None, "bool"),
}


def _convert(key, raw, conv):
    if conv == "bool":
        lowered = raw.lower()
        if lowered in ("1", "true", "yes", "on"):
            return True
        if lowered in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"config key {key!r}: expected a boolean, got {raw!r}")
    try:
        return conv(raw)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot parse {raw!r} as {conv.__name__}") from None


def parse_config(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines (``#`` comments) on top of ``base``.

    Unknown keys are errors. Page block counts default to the grid size
    divided by ``block_px`` when only the grid is given.
    """
    base = base or ExperimentConfig()
    sections = {"optical": {}, "page": {}, "train": {}, "adam": {}, None: {}}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected 'key = value'")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in _KEYS:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")
        section, conv = _KEYS[key]
        sections[section][key] = _convert(key, value, conv)

    optical = dataclasses.replace(base.optical, **sections["optical"])
    page_kw = sections["page"]
    block_px = page_kw.get("block_px", base.page.block_px)
    page_kw.setdefault("blocks_x", optical.pixels_x // block_px)
    page_kw.setdefault("blocks_y", optical.pixels_y // block_px)
    page = dataclasses.replace(base.page, **page_kw)
    adam = dataclasses.replace(base.train.adam, **sections["adam"])
    top = sections[None]
    train = dataclasses.replace(base.train, adam=adam, **sections["train"])
    return dataclasses.replace(base, optical=optical, page=page, train=train, **top)


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"))


def format_config(config: ExperimentConfig) -> str:
    o, p, t = config.optical, config.page, config.train
    values = {
        "pixels_x": o.pixels_x, "pixels_y": o.pixels_y, "pitch": o.pitch,
        "wavelength": o.wavelength, "distance_z": o.distance_z, "pad": o.pad,
        "blocks_x": p.blocks_x, "blocks_y": p.blocks_y, "block_px": p.block_px,
        "n_hidden": t.n_hidden, "batch_size": t.batch_size, "dropout_rate": t.dropout_rate,
        "epochs": t.epochs, "alpha": t.adam.alpha, "beta1": t.adam.beta1,
        "beta2": t.adam.beta2, "epsilon": t.adam.epsilon, "tile_px": config.tile_px,
        "n_train_images": config.n_train_images, "n_eval_images": config.n_eval_images,
        "normalization": config.normalization, "norm_constant": config.norm_constant,
        "seed": config.seed, "png": config.png,
    }
    return "".join(f"{k} = {str(v).lower() if isinstance(v, bool) else v}\n" for k, v in values.items())


# -- dataset ---------------------------------------------------------------


def normalize(recon: np.ndarray, config: ExperimentConfig) -> np.ndarray:
    """Scale a raw reconstruction into [0, 1].

    ``per-image-max`` divides by the image maximum; ``global-constant``
    divides by ``norm_constant`` and clips at 1.
    """
    if config.normalization == "per-image-max":
        peak = recon.max()
        return recon / peak if peak > 0 else np.zeros_like(recon)
    return np.clip(recon / config.norm_constant, 0.0, 1.0)


def image_seeds(config: ExperimentConfig, split: str, index: int) -> tuple[int, list[int]]:
    """Page-data seed and random-phase seed for one image.

    Training images use page seeds ``seed + 1 .. seed + n_train``; held-out
    images continue after them so the two never overlap.
    """
    offset = 1 + index if split == "train" else 1 + config.n_train_images + index
    page_seed = config.seed + offset
    return page_seed, [config.seed, offset, 1]


def simulate(image, config: ExperimentConfig, phase_seed) -> np.ndarray:
    """Record and reconstruct ``image`` through the hologram channel, normalized."""
    return normalize(simulate_reconstruction(image, config.optical, phase_seed), config)


def make_pair(config: ExperimentConfig, split: str, index: int):
    page_seed, phase_seed = image_seeds(config, split, index)
    original = generate_page_data(dataclasses.replace(config.page, seed=page_seed))
    return original, simulate(original, config, phase_seed), page_seed, phase_seed


def _save_image(path: Path, image, png: bool):
    write_pgm(path, image)
    if png:
        write_png(path.with_suffix(".png"), image)


def gen_dataset(config: ExperimentConfig, out_dir) -> Path:
    """Generate training and held-out pairs under ``out_dir``; return the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rows = []
    for split, count in (("train", config.n_train_images), ("eval", config.n_eval_images)):
        for i in range(count):
            original, recon, page_seed, phase_seed = make_pair(config, split, i)
            orig_name = f"{split}_{i:04d}_original.pgm"
            recon_name = f"{split}_{i:04d}_reconstruction.pgm"
            _save_image(out / orig_name, original, config.png)
            _save_image(out / recon_name, recon, config.png)
            rows.append((split, i, page_seed, "-".join(map(str, phase_seed)), orig_name, recon_name))
            log.info("generated %s image %d", split, i)

    manifest = out / MANIFEST_NAME
    with open(manifest, "w", encoding="utf-8", newline="") as f:
        f.write(f"# seed = {config.seed}\n")
        f.write(f"# tile_px = {config.tile_px}\n")
        f.write(f"# train_subpatterns = {config.subpattern_count()}\n")
        writer = csv.writer(f, delimiter="\t", lineterminator="\n")
        writer.writerow(MANIFEST_COLUMNS)
        writer.writerows(rows)
    (out / "config.txt").write_text(format_config(config), encoding="utf-8")
    return manifest


@dataclass
class ManifestEntry:
    split: str
    index: int
    page_seed: int
    phase_seed: str
    original: Path
    reconstruction: Path


def read_manifest(path) -> tuple[dict, list[ManifestEntry]]:
    """Return ``(header, entries)``; paths are resolved relative to the manifest."""
    path = Path(path)
    if path.is_dir():
        path = path / MANIFEST_NAME
    if not path.is_file():
        raise FileNotFoundError(f"no dataset manifest at {path}")
    header, body = {}, []
    for line in path.read_text(encoding="utf-8").splitlines():
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        elif line.strip():
            body.append(line)
    rows = list(csv.reader(body, delimiter="\t"))
    if not rows or tuple(rows[0]) != MANIFEST_COLUMNS:
        raise ValueError(f"{path}: corrupt manifest header")
    entries = []
    for row in rows[1:]:
        if len(row) != len(MANIFEST_COLUMNS):
            raise ValueError(f"{path}: corrupt manifest row {row!r}")
        split, index, page_seed, phase_seed, orig, recon = row
        entries.append(
            ManifestEntry(split, int(index), int(page_seed), phase_seed, path.parent / orig, path.parent / recon)
        )
    return header, entries


def load_training_pairs(manifest, tile_px: int, split: str = "train") -> tuple[np.ndarray, np.ndarray]:
    """Tile every pair of ``split`` in the manifest into stacked input/target arrays."""
    _, entries = read_manifest(manifest)
    xs, ts = [], []
    for entry in entries:
        if entry.split != split:
            continue
        x, t = subpattern_pairs(read_image(entry.reconstruction), read_image(entry.original), tile_px)
        xs.append(x)
        ts.append(t)
    if not xs:
        raise ValueError(f"manifest {manifest} lists no {split!r} pairs")
    return np.concatenate(xs), np.concatenate(ts)


# -- commands --------------------------------------------------------------


def write_loss_csv(path, history) -> None:
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write("epoch,mean_loss\n")
        for epoch, value in enumerate(history, 1):
            f.write(f"{epoch},{value:.17g}\n")


def read_loss_csv(path) -> list[float]:
    with open(path, encoding="utf-8") as f:
        rows = list(csv.DictReader(f))
    return [float(r["mean_loss"]) for r in rows]


def train_cmd(manifest, config: ExperimentConfig, out_dir) -> tuple[Path, Path]:
    """Train on the manifest's training pairs; write ``model.hrae`` and ``loss.csv``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    X, T = load_training_pairs(manifest, config.tile_px)
    log.info("training on %d subpatterns", X.shape[0])
    params, history = ae.train(X, T, config.train)
    model_path, csv_path = out / "model.hrae", out / "loss.csv"
    ae.save_params(params, model_path)
    write_loss_csv(csv_path, history)
    return model_path, csv_path


def difference_image(a, b) -> np.ndarray:
    return np.abs(np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64))


def restore_cmd(model_path, image_path, config: ExperimentConfig, out_path, reference=None):
    """Restore one degraded image file. Optionally also write ``|restored - reference|``.

    Returns ``(restored_path, difference_path_or_None)``.
    """
    params = ae.load_params(model_path)
    degraded = read_image(image_path)
    restored = ae.restore(params, degraded, config.tile_px)
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    _save_image(out_path, restored, config.png)
    diff_path = None
    if reference is not None:
        ref = read_image(reference)
        if ref.shape != restored.shape:
            raise ValueError(f"reference {ref.shape} and restored {restored.shape} differ in shape")
        diff_path = out_path.with_name(out_path.stem + "_diff.pgm")
        _save_image(diff_path, difference_image(restored, ref), config.png)
    return out_path, diff_path


def evaluate(original, raw, restored, block_px: int) -> dict:
    """Per-pixel mean squared error and block bit-error rate for raw and restored images."""
    original, raw, restored = (np.asarray(a, dtype=np.float64) for a in (original, raw, restored))
    if not original.shape == raw.shape == restored.shape:
        raise ValueError(f"dimension mismatch: {original.shape}, {raw.shape}, {restored.shape}")
    return {
        "mse_raw": float(np.mean((raw - original) ** 2)),
        "mse_restored": float(np.mean((restored - original) ** 2)),
        "ber_raw": bit_error_rate(original, raw, block_px),
        "ber_restored": bit_error_rate(original, restored, block_px),
    }


def format_report(metrics: dict) -> str:
    lines = [f"{k:<13} {metrics[k]:.12g}" for k in METRIC_FIELDS]
    csv_line = ",".join(METRIC_FIELDS) + "\n" + ",".join(f"{metrics[k]:.12g}" for k in METRIC_FIELDS)
    return "\n".join(lines) + "\n\n" + csv_line + "\n"


def evaluate_cmd(original_path, raw_path, restored_path, block_px: int, out_csv=None) -> dict:
    metrics = evaluate(read_image(original_path), read_image(raw_path), read_image(restored_path), block_px)
    if out_csv is not None:
        with open(out_csv, "w", encoding="utf-8") as f:
            f.write(",".join(METRIC_FIELDS) + "\n")
            f.write(",".join(f"{metrics[k]:.12g}" for k in METRIC_FIELDS) + "\n")
    return metrics


def run_all(config: ExperimentConfig, out_dir) -> Path:
    """Generate, train, restore and evaluate in one go; return the metrics CSV path.

    Restorations are reported for every held-out image (``heldout``) and for
    the first training image (``train``).
    """
    out = Path(out_dir)
    manifest = gen_dataset(config, out / "dataset")
    model_path, _ = train_cmd(manifest, config, out)
    _, entries = read_manifest(manifest)
    evaluated = [e for e in entries if e.split == "eval"] + [e for e in entries if e.split == "train"][:1]

    metrics_path = out / "metrics.csv"
    with open(metrics_path, "w", encoding="utf-8") as f:
        f.write("protocol,image," + ",".join(METRIC_FIELDS) + "\n")
        for e in evaluated:
            label = "heldout" if e.split == "eval" else "train"
            restored_path, _ = restore_cmd(
                model_path, e.reconstruction, config, out / "restored" / f"{e.split}_{e.index:04d}_restored.pgm",
                reference=e.original,
            )
            m = evaluate_cmd(e.original, e.reconstruction, restored_path, config.page.block_px)
            f.write(f"{label},{e.original.name}," + ",".join(f"{m[k]:.12g}" for k in METRIC_FIELDS) + "\n")
            log.info("%s %s: %s", label, e.original.name, m)
    return metrics_path
