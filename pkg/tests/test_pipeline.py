import dataclasses

import numpy as np
import pytest

from holorestore import pipeline
from holorestore.autoencoder import TrainConfig, init_params, save_params
from holorestore.cli import main
from holorestore.optics import OpticalConfig
from holorestore.patterns import PageDataSpec, read_image, write_pgm


def tiny_config(**kw):
    base = dict(
        optical=OpticalConfig(40, 40),
        page=PageDataSpec(4, 4, 10),
        tile_px=20,
        train=TrainConfig(n_hidden=8, batch_size=4, epochs=3),
        n_train_images=2,
        n_eval_images=1,
    )
    base.update(kw)
    return pipeline.ExperimentConfig(**base)


class TestConfig:
    def test_defaults_are_desk_scale(self):
        cfg = pipeline.ExperimentConfig()
        assert cfg.optical.shape == (200, 200)
        assert (cfg.page.blocks_x, cfg.page.block_px, cfg.tile_px) == (20, 10, 20)
        assert cfg.n_train_images == 19
        assert (cfg.train.batch_size, cfg.train.n_hidden, cfg.train.epochs) == (100, 50, 40)

    def test_full_scale_counts(self):
        assert pipeline.ExperimentConfig.full_scale().subpattern_count(19) == 47_500
        assert pipeline.ExperimentConfig.full_scale().subpattern_count(99) == 247_500

    def test_invariants(self):
        with pytest.raises(ValueError):
            tiny_config(page=PageDataSpec(5, 4, 10))
        with pytest.raises(ValueError):
            tiny_config(tile_px=15)
        with pytest.raises(ValueError):
            tiny_config(n_train_images=0)
        with pytest.raises(ValueError):
            tiny_config(normalization="log")

    def test_parse(self):
        text = """
        # smaller run
        pixels_x = 40
        pixels_y = 40   # grid
        n_hidden = 8
        dropout_rate = 0.008
        alpha = 0.01
        seed = 12
        pad = true
        normalization = global-constant
        norm_constant = 3.5
        """
        cfg = pipeline.parse_config(text)
        assert cfg.optical.shape == (40, 40) and cfg.optical.pad
        assert (cfg.page.blocks_x, cfg.page.blocks_y) == (4, 4)
        assert cfg.train.dropout_rate == 0.008 and cfg.train.adam.alpha == 0.01
        assert cfg.seed == 12 and cfg.train.seed == 12
        assert cfg.normalization == "global-constant" and cfg.norm_constant == 3.5

    def test_round_trip(self):
        cfg = tiny_config(seed=5)
        assert pipeline.parse_config(pipeline.format_config(cfg)) == cfg

    @pytest.mark.parametrize("text", ["n_hiden = 3", "epochs = many", "just words", "pad = maybe"])
    def test_parse_errors(self, text):
        with pytest.raises(ValueError):
            pipeline.parse_config(text)


class TestNormalization:
    def test_per_image_max(self):
        recon = np.random.default_rng(0).random((8, 8)) * 7
        out = pipeline.normalize(recon, tiny_config())
        assert out.max() == 1.0 and out.min() >= 0

    def test_global_constant(self):
        out = pipeline.normalize(np.array([[1.0, 4.0]]), tiny_config(normalization="global-constant", norm_constant=2.0))
        assert out.tolist() == [[0.5, 1.0]]


class TestDataset:
    def test_gen_and_load(self, tmp_path):
        cfg = tiny_config()
        manifest = pipeline.gen_dataset(cfg, tmp_path)
        header, entries = pipeline.read_manifest(manifest)
        assert int(header["train_subpatterns"]) == 2 * 4
        assert [e.split for e in entries] == ["train", "train", "eval"]
        assert len({e.page_seed for e in entries}) == 3
        for e in entries:
            orig, recon = read_image(e.original), read_image(e.reconstruction)
            assert set(np.unique(orig)) <= {0.0, 1.0}
            assert recon.max() == 1.0
        X, T = pipeline.load_training_pairs(manifest, cfg.tile_px)
        assert X.shape == T.shape == (8, 400)

    def test_deterministic(self, tmp_path):
        cfg = tiny_config()
        pipeline.gen_dataset(cfg, tmp_path / "a")
        pipeline.gen_dataset(cfg, tmp_path / "b")
        for f in (tmp_path / "a").iterdir():
            assert f.read_bytes() == (tmp_path / "b" / f.name).read_bytes()

    def test_corrupt_manifest(self, tmp_path):
        (tmp_path / pipeline.MANIFEST_NAME).write_text("garbage\n")
        with pytest.raises(ValueError):
            pipeline.read_manifest(tmp_path)
        with pytest.raises(FileNotFoundError):
            pipeline.read_manifest(tmp_path / "missing")

    def test_png_previews(self, tmp_path):
        pipeline.gen_dataset(tiny_config(n_train_images=1, n_eval_images=0, png=True), tmp_path)
        assert (tmp_path / "train_0000_original.png").is_file()


class TestCommands:
    def test_train_cmd(self, tmp_path):
        cfg = tiny_config()
        manifest = pipeline.gen_dataset(cfg, tmp_path / "data")
        model, loss_csv = pipeline.train_cmd(manifest, cfg, tmp_path)
        lines = loss_csv.read_text().splitlines()
        assert lines[0] == "epoch,mean_loss"
        assert len(lines) == 1 + cfg.train.epochs
        # at least 12 significant digits
        assert all(len(l.split(",")[1].replace(".", "").lstrip("0")) >= 12 for l in lines[1:])
        assert np.all(np.isfinite(pipeline.read_loss_csv(loss_csv)))
        model_bytes = model.read_bytes()
        pipeline.train_cmd(manifest, cfg, tmp_path / "again")
        assert (tmp_path / "again" / "model.hrae").read_bytes() == model_bytes

    def test_restore_cmd_difference(self, tmp_path):
        cfg = tiny_config()
        save_params(init_params(400, 8, 0), tmp_path / "m.hrae")
        img = np.random.default_rng(1).random((40, 40))
        write_pgm(tmp_path / "in.pgm", img)
        restored, diff = pipeline.restore_cmd(tmp_path / "m.hrae", tmp_path / "in.pgm", cfg, tmp_path / "r.pgm")
        assert diff is None
        restored, diff = pipeline.restore_cmd(tmp_path / "m.hrae", tmp_path / "in.pgm", cfg, tmp_path / "r.pgm", reference=tmp_path / "r.pgm")
        assert np.all(read_image(diff) == 0)

    def test_restore_dimension_mismatch(self, tmp_path):
        save_params(init_params(100, 8, 0), tmp_path / "m.hrae")
        write_pgm(tmp_path / "in.pgm", np.zeros((40, 40)))
        with pytest.raises(ValueError):
            pipeline.restore_cmd(tmp_path / "m.hrae", tmp_path / "in.pgm", tiny_config(), tmp_path / "o.pgm")

    def test_evaluate(self):
        orig = np.kron(np.array([[1.0, 0.0]]), np.ones((10, 10)))
        m = pipeline.evaluate(orig, orig * 0.3, orig, 10)
        assert set(m) == {"mse_raw", "mse_restored", "ber_raw", "ber_restored"}
        assert m["mse_restored"] == 0 and m["ber_restored"] == 0
        assert m["ber_raw"] == 0.5
        with pytest.raises(ValueError):
            pipeline.evaluate(orig, orig[:, :10], orig, 10)

    def test_report_format(self):
        report = pipeline.format_report({"mse_raw": 0.1, "mse_restored": 0.0, "ber_raw": 0.5, "ber_restored": 0.0})
        assert "mse_raw,mse_restored,ber_raw,ber_restored\n0.1,0,0.5,0" in report


class TestCli:
    def write_config(self, path, **extra):
        text = "pixels_x = 40\npixels_y = 40\nn_hidden = 8\nbatch_size = 4\nepochs = 2\nn_train_images = 2\n"
        text += "".join(f"{k} = {v}\n" for k, v in extra.items())
        path.write_text(text)
        return path

    def test_run_all_and_steps(self, tmp_path, capsys):
        cfg = self.write_config(tmp_path / "c.txt")
        out = tmp_path / "out"
        assert main(["run-all", "--config", str(cfg), "--out", str(out), "--seed", "3"]) == 0
        metrics = (out / "metrics.csv").read_text().splitlines()
        assert metrics[0] == "protocol,image,mse_raw,mse_restored,ber_raw,ber_restored"
        assert metrics[1].startswith("heldout,") and metrics[2].startswith("train,")

        data = out / "dataset"
        assert main(["restore", str(out / "model.hrae"), str(data / "eval_0000_reconstruction.pgm"),
                     "--config", str(cfg), "--out", str(tmp_path / "r"),
                     "--reference", str(data / "eval_0000_original.pgm")]) == 0
        restored = tmp_path / "r" / "eval_0000_reconstruction_restored.pgm"
        assert restored.is_file()
        capsys.readouterr()
        assert main(["evaluate", str(data / "eval_0000_original.pgm"), str(data / "eval_0000_reconstruction.pgm"),
                     str(restored), "--block-px", "10", "--out", str(tmp_path / "ev")]) == 0
        assert "ber_restored" in capsys.readouterr().out
        assert (tmp_path / "ev" / "evaluation.csv").read_text().startswith("mse_raw,mse_restored,ber_raw,ber_restored\n")

    def test_gen_then_train(self, tmp_path):
        cfg = self.write_config(tmp_path / "c.txt")
        assert main(["gen-dataset", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert main(["train", "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert len((tmp_path / "loss.csv").read_text().splitlines()) == 3

    def test_simulate(self, tmp_path):
        cfg = self.write_config(tmp_path / "c.txt")
        board = np.kron(np.indices((4, 4)).sum(axis=0) % 2, np.ones((10, 10)))
        write_pgm(tmp_path / "qr.pgm", board)
        assert main(["simulate", str(tmp_path / "qr.pgm"), "--config", str(cfg), "--out", str(tmp_path)]) == 0
        assert np.array_equal(read_image(tmp_path / "qr_original.pgm"), board)
        assert read_image(tmp_path / "qr_reconstruction.pgm").max() == 1.0

    def test_errors_give_nonzero_exit(self, tmp_path, capsys):
        assert main(["train", "--out", str(tmp_path)]) == 1
        err = capsys.readouterr().err
        assert err.startswith("holorestore: error:") and err.count("\n") == 1
        bad = tmp_path / "bad.txt"
        bad.write_text("n_train_images = 0\n")
        assert main(["gen-dataset", "--config", str(bad), "--out", str(tmp_path)]) == 1
        bad.write_text("typo = 1\n")
        assert main(["run-all", "--config", str(bad), "--out", str(tmp_path)]) == 1
