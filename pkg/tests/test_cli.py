import csv

import pytest
from PIL import Image

from amfusion.cli import build_parser, main
from amfusion.data import save_config
from amfusion.synth import read_manifest
from amfusion.trainer import Checkpoint


class TestParser:
    def test_train_defaults(self):
        args = build_parser().parse_args(
            ["train", "--data", "d", "--out", "o"])
        assert args.scale == "paper" and args.seed == 0 and args.config is None

    def test_requires_subcommand(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_requires_fuse_arguments(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["fuse", "--ckpt", "c"])

    def test_rejects_unknown_scale(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(
                ["train", "--data", "d", "--out", "o", "--scale", "huge"])


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """synth -> train -> fuse -> eval, all through the console entry point."""
    root = tmp_path_factory.mktemp("cli")
    data, run = root / "data", root / "run"
    cfg = root / "tiny.cfg"
    save_config_args = {"base_channels": 4}
    from amfusion.data import FusionConfig

    save_config(FusionConfig(**save_config_args), cfg)
    assert main(["synth", "--n", "2", "--size", "64", "--seed", "5",
                 "--out", str(data)]) == 0
    assert main(["train", "--data", str(data), "--config", str(cfg),
                 "--out", str(run), "--scale", "desk", "--seed", "1"]) == 0
    return root, data, run


class TestCommands:
    def test_synth_outputs(self, workspace):
        _, data, _ = workspace
        ids = read_manifest(data)
        assert ids == ["scene0000", "scene0001"]
        for pid in ids:
            for suffix in ("vis", "ir", "gt"):
                assert (data / f"{pid}_{suffix}.png").exists()

    def test_train_outputs(self, workspace):
        _, _, run = workspace
        ckpt = Checkpoint.load(run / "checkpoint.pt")
        # Desk schedule on 2 pairs: one step per epoch, 50 + 10 epochs.
        assert ckpt.global_step == 60
        assert ckpt.config.base_channels == 4
        assert ckpt.schedule.crop == 64
        with open(run / "loss_log.csv", newline="") as fh:
            assert len(list(csv.reader(fh))) == 1 + 60

    def test_fuse_command(self, workspace):
        root, data, run = workspace
        out = root / "fused.png"
        code = main(["fuse", "--ckpt", str(run / "checkpoint.pt"),
                     "--vis", str(data / "scene0000_vis.png"),
                     "--ir", str(data / "scene0000_ir.png"),
                     "--out", str(out)])
        assert code == 0
        with Image.open(out) as img:
            assert img.size == (64, 64) and img.mode == "RGB"

    def test_eval_command(self, workspace):
        root, data, run = workspace
        out = root / "metrics.csv"
        code = main(["eval", "--ckpt", str(run / "checkpoint.pt"),
                     "--data", str(data), "--out", str(out)])
        assert code == 0
        with open(out, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["id", "en", "mi", "sd"]
        assert len(rows) == 1 + 3

    def test_domain_errors_exit_2(self, workspace, tmp_path, capsys):
        root, data, _ = workspace
        code = main(["fuse", "--ckpt", str(tmp_path / "absent.pt"),
                     "--vis", str(data / "scene0000_vis.png"),
                     "--ir", str(data / "scene0000_ir.png"),
                     "--out", str(tmp_path / "x.png")])
        assert code == 2
        assert capsys.readouterr().err.startswith("error:")

    def test_empty_dataset_exit_2(self, tmp_path, capsys):
        code = main(["train", "--data", str(tmp_path), "--out",
                     str(tmp_path / "out"), "--scale", "desk"])
        assert code == 2
        assert "error:" in capsys.readouterr().err
