import filecmp
import os
import re

import numpy as np
import pytest

from esr.cli import TRAIN_DEFAULTS, _merged, build_parser, main
from esr.dataio import load_image, load_landmarks, load_model, load_ppm, save_landmarks, save_pgm
from esr.geometry import bounding_box

FAST = ["--stages", "2", "--ferns", "5", "--pixels", "20", "--features", "3", "--aug", "3", "--beta", "10"]


@pytest.fixture(scope="module")
def data_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "data"
    assert main(["synth", "--out", str(out), "--count", "12", "--n-fp", "10", "--size", "64", "--seed", "2"]) == 0
    return out


@pytest.fixture(scope="module")
def model_path(data_dir):
    path = data_dir.parent / "model.json"
    assert main(["train", "--data", str(data_dir), "--model", str(path), *FAST]) == 0
    return path


def test_synth_single_pair(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path / "d"), "--count", "1"]) == 0
    assert sorted(os.listdir(tmp_path / "d")) == ["00000.pgm", "00000.pts"]
    shape, box = load_landmarks(tmp_path / "d" / "00000.pts")
    assert shape.shape == (29, 2) and box is not None
    assert load_image(tmp_path / "d" / "00000.pgm").shape == (128, 128)
    assert "count=1" in capsys.readouterr().out


def test_synth_repeatable(tmp_path):
    for name in ("a", "b"):
        assert main(["synth", "--out", str(tmp_path / name), "--count", "3", "--size", "48", "--seed", "5"]) == 0
    cmp = filecmp.dircmp(tmp_path / "a", tmp_path / "b")
    assert not cmp.diff_files and not cmp.left_only and not cmp.right_only
    for f in os.listdir(tmp_path / "a"):
        assert filecmp.cmp(tmp_path / "a" / f, tmp_path / "b" / f, shallow=False)


def test_train_defaults():
    args = build_parser().parse_args(["train", "--data", "d", "--model", "m"])
    cfg = _merged(args, TRAIN_DEFAULTS)
    assert (cfg["stages"], cfg["ferns"], cfg["features"], cfg["aug"], cfg["pixels"]) == (10, 500, 5, 20, 400)
    assert cfg["kappa"] == 0.3 and cfg["beta"] == 1000.0


def test_config_precedence(tmp_path):
    conf = tmp_path / "c.cfg"
    conf.write_text("# comment\nstages = 3\nferns=7\n\nbeta=2.5\n")
    args = build_parser().parse_args(["train", "--data", "d", "--model", "m", "--config", str(conf),
                                      "--stages", "4"])
    cfg = _merged(args, TRAIN_DEFAULTS)
    assert cfg["stages"] == 4
    assert cfg["ferns"] == 7
    assert cfg["beta"] == 2.5
    assert cfg["pixels"] == 400


@pytest.mark.parametrize("text", ["stages\n", "color=red\n", "stages=three\n"])
def test_bad_config(tmp_path, data_dir, text):
    conf = tmp_path / "c.cfg"
    conf.write_text(text)
    assert main(["train", "--data", str(data_dir), "--model", str(tmp_path / "m"), "--config", str(conf)]) == 1


def test_train_zero_stages(data_dir, tmp_path):
    path = tmp_path / "m0.json"
    assert main(["train", "--data", str(data_dir), "--model", str(path), "--stages", "0", "--aug", "2"]) == 0
    model = load_model(path)
    assert model.stages == [] and model.n_fp == 10


def test_train_log_non_increasing(data_dir, tmp_path, capsys):
    capsys.readouterr()
    path = tmp_path / "m.json"
    assert main(["train", "--data", str(data_dir), "--model", str(path), *FAST]) == 0
    out = capsys.readouterr().out
    assert "stages=2" in out and "ferns=5" in out and "aug=3" in out
    errors = [float(e) for e in re.findall(r"^stage=\d+ train_error=(\S+)$", out, re.M)]
    assert len(errors) == 3
    assert all(b <= a for a, b in zip(errors, errors[1:]))


def test_train_same_seed_same_file(data_dir, model_path, tmp_path):
    again = tmp_path / "again.json"
    assert main(["train", "--data", str(data_dir), "--model", str(again), *FAST]) == 0
    assert filecmp.cmp(model_path, again, shallow=False)


def test_predict_repeatable(data_dir, model_path, tmp_path):
    outs = []
    for name in ("a.pts", "b.pts"):
        out = tmp_path / name
        assert main(["predict", "--model", str(model_path), "--image", str(data_dir / "00003.pgm"),
                     "--out", str(out), "--box-from", str(data_dir / "00003.pts")]) == 0
        outs.append(out)
    assert outs[0].read_text() == outs[1].read_text()
    shape, box = load_landmarks(outs[0])
    assert shape.shape == (10, 2)
    assert box == load_landmarks(data_dir / "00003.pts")[1]


def test_predict_without_box(data_dir, model_path, tmp_path):
    out = tmp_path / "p.pts"
    assert main(["predict", "--model", str(model_path), "--image", str(data_dir / "00000.pgm"),
                 "--out", str(out), "--n-init", "1"]) == 0
    shape, box = load_landmarks(out)
    assert box is None and np.all(np.isfinite(shape))


def test_eval_report(data_dir, model_path, tmp_path):
    report = tmp_path / "r.txt"
    assert main(["eval", "--model", str(model_path), "--data", str(data_dir), "--report", str(report)]) == 0
    text = report.read_text()
    assert text.count("image=") == 12
    assert "threshold=inf fraction=1" in text


def test_eval_degenerate_model_is_exact(tmp_path):
    d = tmp_path / "same"
    d.mkdir()
    image = np.random.default_rng(0).integers(0, 256, size=(40, 40)).astype(np.uint8)
    shape = np.array([[10.0, 12.0], [25.0, 11.0], [18.0, 20.0], [12.0, 30.0], [26.0, 29.0]])
    for i in range(4):
        save_pgm(d / f"{i}.pgm", image)
        save_landmarks(d / f"{i}.pts", shape, bounding_box(shape))
    model = tmp_path / "m.json"
    report = tmp_path / "r.txt"
    assert main(["train", "--data", str(d), "--model", str(model), "--stages", "2", "--ferns", "3",
                 "--pixels", "10", "--features", "2", "--aug", "2"]) == 0
    assert main(["eval", "--model", str(model), "--data", str(d), "--report", str(report)]) == 0
    mean = float(re.search(r"^mean=(\S+)$", report.read_text(), re.M).group(1))
    assert mean == pytest.approx(0.0, abs=1e-9)


def test_visualize_single_pixel(tmp_path):
    save_pgm(tmp_path / "a.pgm", np.zeros((1, 1), np.uint8))
    save_landmarks(tmp_path / "a.pts", np.zeros((2, 2)))
    assert main(["visualize", "--image", str(tmp_path / "a.pgm"), "--landmarks", str(tmp_path / "a.pts"),
                 "--out", str(tmp_path / "v.ppm")]) == 0
    rgb = load_ppm(tmp_path / "v.ppm")
    assert rgb.shape == (1, 1, 3)
    np.testing.assert_array_equal(rgb[0, 0], [255, 0, 0])


@pytest.mark.parametrize("argv", [
    [],
    ["bogus"],
    ["synth", "--count", "1"],
    ["synth", "--out", "x", "--count", "0"],
    ["train", "--data", "d"],
    ["train", "--data", "d", "--model", "m", "--stages", "many"],
    ["eval", "--model", "m", "--data", "d", "--report", "r", "--normalizer", "0-1"],
    ["predict", "--model", "m", "--image", "i", "--out", "o", "--n-init", "0"],
])
def test_usage_errors(argv):
    assert main(argv) == 1


def test_help_exits_cleanly(capsys):
    assert main(["--help"]) == 0
    assert "train" in capsys.readouterr().out


def test_data_errors(tmp_path, model_path):
    assert main(["train", "--data", str(tmp_path / "missing"), "--model", str(tmp_path / "m")]) == 2
    bad = tmp_path / "bad.pgm"
    bad.write_bytes(b"P5\n2 2\n255\n\x00")
    assert main(["predict", "--model", str(model_path), "--image", str(bad), "--out", str(tmp_path / "o")]) == 2
    junk = tmp_path / "junk.json"
    junk.write_text("{}")
    assert main(["predict", "--model", str(junk), "--image", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_train_invalid_params_are_usage(data_dir, tmp_path):
    assert main(["train", "--data", str(data_dir), "--model", str(tmp_path / "m"), "--features", "17"]) == 1
