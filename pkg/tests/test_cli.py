import csv
import hashlib
import json
from unittest.mock import patch

import pytest

from fxgrad.cli import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_IO, EXIT_OK, main
from fxgrad.errors import TrainingAborted
from fxgrad.grad.check import GradCheckResult


def _datagen(tmp_path, name="data", *extra):
    data_dir = tmp_path / name
    argv = ["datagen", "--preset", "smoke", "--set", f"data.dir={data_dir}", "--set", "data.pairs=5", *extra]
    return main(argv), data_dir


def _digests(directory):
    return {str(p.relative_to(directory)): hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(directory.rglob("*.wav"))}


@pytest.fixture
def trained(tmp_path, capsys):
    """A one-epoch smoke run: dataset plus checkpoint."""
    code, data_dir = _datagen(tmp_path)
    assert code == EXIT_OK
    out = tmp_path / "run"
    code = main([
        "train", "--preset", "smoke", "--out", str(out),
        "--set", f"data.dir={data_dir}", "--set", "trainer.max_epochs=1", "--set", "trainer.steps_per_epoch=2",
    ])
    assert code == EXIT_OK
    capsys.readouterr()
    return data_dir, out


def test_datagen_writes_manifest_and_is_reproducible(tmp_path, capsys):
    """
    Two runs with the same seed write the same pairs, byte for byte.
    """
    # 1. Arrange / 2. Act
    code_a, dir_a = _datagen(tmp_path, "a")
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    code_b, dir_b = _datagen(tmp_path, "b")

    # 3. Assert
    assert code_a == code_b == EXIT_OK
    assert summary["pairs"] == 5
    assert (summary["train"], summary["val"], summary["test"]) == (3, 1, 1)
    rows = (dir_a / "manifest.tsv").read_text().splitlines()
    assert len(rows) == 5
    assert all(len(r.split("\t")) == 3 for r in rows)
    assert _digests(dir_a) == _digests(dir_b)
    assert (dir_a / "hidden_params.json").is_file()


def test_datagen_seed_changes_the_data(tmp_path):
    _, dir_a = _datagen(tmp_path, "a")
    _, dir_b = _datagen(tmp_path, "b", "--seed", "1")
    assert _digests(dir_a) != _digests(dir_b)


def test_datagen_without_teacher_is_a_config_error(tmp_path):
    """
    A config with sources but no teacher effect exits with code 2.
    """
    cfg = tmp_path / "run.cfg"
    cfg.write_text(f"effect.id = gain\nn_params = 1\ndata.dir = {tmp_path / 'd'}\ndata.sources.count = 2\n")
    assert main(["datagen", "--config", str(cfg)]) == EXIT_CONFIG
    assert not (tmp_path / "d").exists()


def test_head_size_mismatch_exits_with_config_error(tmp_path):
    assert main(["datagen", "--preset", "smoke", "--set", "n_params=5", "--set", f"data.dir={tmp_path}"]) == EXIT_CONFIG


def test_train_without_manifest_is_a_config_error(tmp_path):
    code = main(["train", "--preset", "smoke", "--set", f"data.dir={tmp_path / 'missing'}", "--out", str(tmp_path)])
    assert code == EXIT_CONFIG


def test_gradcheck_gain_passes(capsys):
    """
    gain has an exact SPSA estimate, so every row passes.
    """
    # 1. Act
    code = main(["gradcheck", "--preset", "smoke", "--effect", "gain", "--seeds", "20"])
    lines = capsys.readouterr().out.strip().splitlines()

    # 2. Assert
    assert code == EXIT_OK
    assert lines[0].split("\t")[0] == "param"
    assert lines[1].split("\t")[0] == "gain"
    assert lines[-1] == "overall\tPASS"


@pytest.mark.parametrize("seed", range(5))
def test_gradcheck_soft_clip_passes_at_default_seeds(seed, capsys):
    """
    soft_clip with the default 1000 draws passes for every run seed.
    """
    # 1. Act
    code = main(["gradcheck", "--preset", "smoke", "--effect", "soft_clip", "--seed", str(seed)])
    lines = capsys.readouterr().out.strip().splitlines()

    # 2. Assert
    assert [line.split("\t")[0] for line in lines[1:-1]] == ["drive", "level"]
    assert all(line.split("\t")[-1] == "PASS" for line in lines[1:-1]), lines
    assert code == EXIT_OK


def test_train_writes_logs_and_checkpoints(trained):
    _, out = trained
    for name in ("metrics.csv", "timing.csv", "best.fxgw", "last.fxgw", "run_config.yml"):
        assert (out / name).is_file(), name
    with open(out / "metrics.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert len(rows) == 2


def test_render_writes_audio_and_trajectory(trained, tmp_path, capsys):
    """
    The trajectory CSV has one row per frame in physical units.
    """
    # 1. Arrange
    data_dir, out = trained
    source = sorted((data_dir / "inputs").glob("*.wav"))[0]
    wav_out = tmp_path / "rendered.wav"

    # 2. Act
    code = main([
        "render", "--preset", "smoke", "--out", str(out), "--input", str(source), "--output", str(wav_out),
        "--smooth", "0.5",
    ])
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])

    # 3. Assert
    assert code == EXIT_OK
    assert wav_out.is_file()
    with open(tmp_path / "rendered.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0] == ["frame", "seconds", "threshold [dBFS]", "ratio", "knee [dB]", "makeup [dB]"]
    assert len(rows) - 1 == summary["frames"] == 22
    assert -60.0 <= float(rows[1][2]) <= 0.0


def test_render_unreadable_wav_is_an_io_error(trained, tmp_path):
    _, out = trained
    bad = tmp_path / "broken.wav"
    bad.write_bytes(b"RIFF\x00\x00\x00\x00WAVE")
    code = main(["render", "--preset", "smoke", "--out", str(out), "--input", str(bad)])
    assert code == EXIT_IO


def test_eval_reports_mfcc_distances(trained, capsys):
    """
    eval scores the test split and writes a table plus a report.
    """
    # 1. Arrange
    data_dir, out = trained

    # 2. Act
    code = main(["eval", "--preset", "smoke", "--out", str(out), "--set", f"data.dir={data_dir}"])
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])

    # 3. Assert
    assert code == EXIT_OK
    rows = (out / "eval.tsv").read_text().splitlines()
    assert rows[0] == "clip\tmfcc_rendered\tmfcc_baseline"
    assert rows[-1].startswith("mean\t")
    assert len(rows) == 1 + summary["clips"] + 1
    report = (out / "eval_report.md").read_text()
    assert report.startswith("# Evaluation: smoke")
    assert "## Test clips" in report


def test_failed_gradcheck_exits_with_one(capsys):
    """
    A FAIL row turns into exit code 1.
    """
    # 1. Arrange
    failing = GradCheckResult(
        names=["gain"], grad_true=[1.0], grad_fd=[1.0], grad_spsa_mean=[1.5], n_seeds=4, epsilon=1e-3
    )

    # 2. Act
    with patch("fxgrad.cli.analytic_vjp_check", return_value=failing):
        code = main(["gradcheck", "--preset", "smoke", "--effect", "gain"])

    # 3. Assert
    assert code == EXIT_CHECK_FAILED
    assert capsys.readouterr().out.strip().splitlines()[-1] == "overall\tFAIL"


def test_diverged_training_exits_with_one(tmp_path):
    _, data_dir = _datagen(tmp_path)
    with patch("fxgrad.cli.Trainer.fit", side_effect=TrainingAborted("every step non-finite")):
        code = main(["train", "--preset", "smoke", "--out", str(tmp_path / "run"), "--set", f"data.dir={data_dir}"])
    assert code == EXIT_CHECK_FAILED
