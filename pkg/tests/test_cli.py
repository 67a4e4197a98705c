"""Command line contract: exit codes, config layering, end-to-end flows."""

import io
import json

import numpy as np
import pytest
import yaml
from PIL import Image

from wgain.cli import main
from wgain.masks import gen_noise_mask, mask_from_png_bytes, mask_to_png_bytes, mask_to_rle
from wgain.seeding import named_stream

from conftest import random_image


def write_png(path, image01):
    arr = np.rint(np.clip(image01, 0, 1) * 255).astype(np.uint8)
    Image.fromarray(arr, mode="RGB").save(path, format="PNG")


def read_png(path):
    with Image.open(path) as img:
        return np.asarray(img.convert("RGB"), dtype=np.float32) / 255.0


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    """One small training run shared by the downstream command tests."""
    out = tmp_path_factory.mktemp("cli-train") / "run"
    code = main([
        "train", "--synthetic", "6", "--input-side", "32", "--width-scale", "8",
        "--epochs", "1", "--batch", "3", "--alpha", "1e-3", "--seed", "5",
        "--out", str(out),
    ])
    assert code == 0
    return out


class TestExitCodes:
    def test_unknown_subcommand_is_one(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 1

    def test_unknown_flag_is_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["train", "--no-such-flag"])
        assert exc.value.code == 1

    def test_missing_required_flag_is_one(self):
        with pytest.raises(SystemExit) as exc:
            main(["eval"])  # --checkpoint required
        assert exc.value.code == 1

    def test_version_exits_zero(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
        assert "wgain" in capsys.readouterr().out

    def test_bad_checkpoint_path_is_one(self, tmp_path, capsys):
        code = main(["eval", "--checkpoint", str(tmp_path / "missing"), "--synthetic", "2"])
        assert code == 1
        assert "error:" in capsys.readouterr().err

    def test_validation_error_is_one(self, tmp_path, capsys):
        code = main([
            "train", "--synthetic", "2", "--input-side", "32", "--width-scale", "8",
            "--alpha", "-1", "--out", str(tmp_path / "x"),
        ])
        assert code == 1


class TestConfigLayering:
    def test_flag_beats_file_beats_default(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(yaml.safe_dump({
            "epochs": 3, "alpha": 1e-3, "input_side": 32, "width_scale": 8, "batch": 2,
        }))
        out = tmp_path / "run"
        code = main([
            "train", "--config", str(cfg), "--synthetic", "4",
            "--epochs", "1", "--out", str(out),
        ])
        assert code == 0
        resolved = json.loads((out / "manifest.json").read_text())["resolved"]
        assert resolved["train"]["epochs"] == 1        # flag wins
        assert resolved["train"]["alpha"] == 1e-3      # file beats default
        assert resolved["train"]["lambda_g"] == 0.005  # untouched default
        assert resolved["generator"]["input_side"] == 32

    def test_unknown_config_key_is_one(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text(yaml.safe_dump({"learning_rate": 1e-3}))
        code = main(["train", "--config", str(cfg), "--synthetic", "2",
                     "--out", str(tmp_path / "x")])
        assert code == 1
        assert "unknown config keys" in capsys.readouterr().err

    def test_non_mapping_config_is_one(self, tmp_path):
        cfg = tmp_path / "cfg.yaml"
        cfg.write_text("- just\n- a\n- list\n")
        code = main(["train", "--config", str(cfg), "--synthetic", "2",
                     "--out", str(tmp_path / "x")])
        assert code == 1


class TestTrain:
    def test_outputs_and_manifest(self, trained):
        assert (trained / "checkpoint" / "manifest.json").is_file()
        assert (trained / "checkpoint" / "params.npz").is_file()
        assert (trained / "metrics.jsonl").is_file()
        manifest = json.loads((trained / "manifest.json").read_text())
        assert manifest["tool"] == "wgain"
        assert manifest["command"] == "train"
        assert manifest["resolved"]["n_images"] == 6

    def test_metrics_lines_match_steps(self, trained):
        lines = (trained / "metrics.jsonl").read_text().splitlines()
        assert len(lines) == 2  # ceil(6 / 3) steps, one epoch
        assert json.loads(lines[-1])["step"] == 2

    def test_packed_side_must_match_model(self, tmp_path, capsys):
        packed = tmp_path / "corpus.npz"
        imgs = np.zeros((4, 32, 32, 3), dtype=np.float32)
        np.savez(packed, train=imgs, eval=imgs[:1])
        code = main([
            "train", "--data", str(packed), "--input-side", "64", "--width-scale", "8",
            "--out", str(tmp_path / "run"),
        ])
        assert code == 1
        assert "does not match model input_side" in capsys.readouterr().err


class TestPrepare:
    def test_pack_then_train(self, tmp_path):
        data_dir = tmp_path / "images"
        data_dir.mkdir()
        rng = named_stream(71, "cli-prep")
        for i in range(5):
            write_png(data_dir / f"img_{i}.png", random_image(rng, 48))
        prep = tmp_path / "prep"
        code = main([
            "prepare", "--data-dir", str(data_dir), "--target-side", "32",
            "--out", str(prep),
        ])
        assert code == 0
        with np.load(prep / "corpus.npz") as data:
            assert data["train"].shape[1:] == (32, 32, 3)
            assert len(data["train"]) + len(data["eval"]) == 5
        code = main([
            "train", "--data", str(prep / "corpus.npz"), "--input-side", "32",
            "--width-scale", "8", "--epochs", "1", "--batch", "4", "--alpha", "1e-3",
            "--out", str(tmp_path / "run"),
        ])
        assert code == 0


class TestEval:
    def test_report_files_written(self, trained, tmp_path, capsys):
        out = tmp_path / "eval"
        code = main([
            "eval", "--checkpoint", str(trained / "checkpoint"),
            "--synthetic", "3", "--input-side", "32",
            "--scenarios", "noise_50,single_square_25", "--seed", "2",
            "--out", str(out),
        ])
        assert code == 0
        assert (out / "table.csv").is_file()
        assert (out / "table.txt").is_file()
        assert (out / "grid.png").is_file()
        manifest = json.loads((out / "manifest.json").read_text())
        assert manifest["resolved"]["scenarios"] == ["noise_50", "single_square_25"]
        stdout = capsys.readouterr().out
        assert "noise_50" in stdout and "biharmonic" in stdout

    def test_unknown_scenario_is_one(self, trained, tmp_path, capsys):
        code = main([
            "eval", "--checkpoint", str(trained / "checkpoint"),
            "--synthetic", "2", "--input-side", "32",
            "--scenarios", "nosuch", "--out", str(tmp_path / "e"),
        ])
        assert code == 1
        assert "unknown scenarios" in capsys.readouterr().err


class TestInpaint:
    def test_end_to_end_with_generated_mask(self, trained, tmp_path):
        rng = named_stream(72, "cli-inp")
        src = tmp_path / "input.png"
        image = random_image(rng, 32)
        write_png(src, image)
        out_png = tmp_path / "out.png"
        mask_png = tmp_path / "mask.png"
        code = main([
            "inpaint", "--checkpoint", str(trained / "checkpoint"),
            "--image", str(src), "--scenario", "noise", "--p", "0.3",
            "--seed", "3", "--output", str(out_png), "--save-mask", str(mask_png),
        ])
        assert code == 0
        mask = mask_from_png_bytes(mask_png.read_bytes())
        out = read_png(out_png)
        quantized = np.rint(image * 255) / 255
        sel = mask.bits == 1
        assert np.allclose(out[sel], quantized[sel], atol=1e-6)

    def test_deterministic_output_bytes(self, trained, tmp_path):
        rng = named_stream(73, "cli-inp2")
        src = tmp_path / "input.png"
        write_png(src, random_image(rng, 32))
        outs = []
        for name in ("a.png", "b.png"):
            path = tmp_path / name
            code = main([
                "inpaint", "--checkpoint", str(trained / "checkpoint"),
                "--image", str(src), "--scenario", "center-square", "--side", "12",
                "--seed", "9", "--output", str(path),
            ])
            assert code == 0
            outs.append(path.read_bytes())
        assert outs[0] == outs[1]

    def test_mask_file_inputs(self, trained, tmp_path):
        rng = named_stream(74, "cli-inp3")
        src = tmp_path / "input.png"
        write_png(src, random_image(rng, 32))
        mask = gen_noise_mask(32, 32, 0.4, rng)
        png_path = tmp_path / "m.png"
        png_path.write_bytes(mask_to_png_bytes(mask))
        rle_path = tmp_path / "m.rle"
        rle_path.write_text(mask_to_rle(mask))
        results = []
        for mpath in (png_path, rle_path):
            out = tmp_path / f"out-{mpath.suffix[1:]}.png"
            code = main([
                "inpaint", "--checkpoint", str(trained / "checkpoint"),
                "--image", str(src), "--mask", str(mpath), "--seed", "1",
                "--output", str(out),
            ])
            assert code == 0
            results.append(out.read_bytes())
        assert results[0] == results[1]

    def test_missing_mask_and_scenario_is_one(self, trained, tmp_path, capsys):
        src = tmp_path / "input.png"
        write_png(src, random_image(named_stream(75, "cli-inp4"), 32))
        code = main([
            "inpaint", "--checkpoint", str(trained / "checkpoint"),
            "--image", str(src), "--output", str(tmp_path / "o.png"),
        ])
        assert code == 1
        assert "--mask or --scenario" in capsys.readouterr().err


class TestBaseline:
    def test_smooth_image_scores_well(self, tmp_path, capsys):
        i, j = np.mgrid[0:48, 0:48].astype(np.float64)
        plane = 0.2 + 0.006 * i + 0.004 * j
        image = np.stack([plane, plane, plane], axis=2)
        src = tmp_path / "ramp.png"
        write_png(src, image)
        out = tmp_path / "filled.png"
        code = main([
            "baseline", "--image", str(src), "--scenario", "center-square",
            "--side", "16", "--output", str(out),
        ])
        assert code == 0
        msg = capsys.readouterr().out
        assert "psnr" in msg
        psnr_val = float(msg.split("psnr")[1].split(",")[0])
        assert psnr_val > 35  # smooth data, near-exact fill

    def test_target_side_resizes(self, tmp_path):
        rng = named_stream(76, "cli-base")
        src = tmp_path / "big.png"
        write_png(src, random_image(rng, 64))
        out = tmp_path / "out.png"
        code = main([
            "baseline", "--image", str(src), "--target-side", "32",
            "--scenario", "noise", "--p", "0.2", "--output", str(out),
        ])
        assert code == 0
        assert read_png(out).shape == (32, 32, 3)
