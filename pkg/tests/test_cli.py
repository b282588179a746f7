import json

import numpy as np
import pytest

from softspell import cli
from softspell.channel import nearly_noiseless_model, save_model
from softspell.spellnet import build, save_checkpoint


@pytest.fixture()
def workspace(tmp_path):
    words = tmp_path / "words.txt"
    words.write_text(
        "sage\nlud\nnimm\nliste\nmenge\nflur\nschule\nhand\nband\nland\n"
        "haus\nmaus\nwald\nfeld\nberg\nstern\nblume\nvogel\nwasser\nhimmel\n",
        encoding="utf-8",
    )
    model = tmp_path / "model.txt"
    save_model(nearly_noiseless_model(), model)
    return {"words": words, "model": model, "dir": tmp_path}


def run(argv):
    return cli.main([str(a) for a in argv])


def test_calibrate_writes_model_and_manifest(workspace):
    out = workspace["dir"] / "calibrated.txt"
    code = run(
        ["calibrate", "--top1", "0.75", "--top5", "0.98", "--samples", "20000", "--seed", "1", "--out", out]
    )
    assert code == 0
    assert out.exists()
    manifest = json.loads((workspace["dir"] / "calibrated.txt.manifest.json").read_text())
    assert manifest["command"] == "calibrate"
    assert manifest["parameters"]["top1"] == 0.75
    assert manifest["tool"] == "softspell"


def test_calibrate_repeats_byte_identical(workspace):
    a = workspace["dir"] / "a.txt"
    b = workspace["dir"] / "b.txt"
    for out in (a, b):
        assert run(["calibrate", "--samples", "20000", "--seed", "5", "--out", out]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_calibrate_rejects_inverted_targets(workspace, capsys):
    out = workspace["dir"] / "x.txt"
    code = run(["calibrate", "--top1", "0.98", "--top5", "0.75", "--out", out])
    assert code == 2
    assert not out.exists()


def test_train_epochs_zero_equals_fresh_init(workspace):
    ckpt = workspace["dir"] / "net.ckpt"
    code = run(
        [
            "train", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--variant", "hh", "--pairs", "8", "--epochs", "0", "--seed", "3", "--out", ckpt,
        ]
    )
    assert code == 0
    fresh = workspace["dir"] / "fresh.ckpt"
    save_checkpoint(build(rng=np.random.default_rng(3)), fresh)
    assert ckpt.read_bytes() == fresh.read_bytes()
    history = (workspace["dir"] / "net.ckpt.history.csv").read_text()
    assert history == "epoch,loss,char_accuracy\n"


def test_train_is_byte_deterministic(workspace):
    args = [
        "train", "--lexicon", workspace["words"], "--model", workspace["model"],
        "--variant", "ss", "--pairs", "12", "--epochs", "2", "--batch", "8", "--seed", "7",
    ]
    a = workspace["dir"] / "a.ckpt"
    b = workspace["dir"] / "b.ckpt"
    assert run(args + ["--out", a]) == 0
    assert run(args + ["--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (workspace["dir"] / "a.ckpt.history.csv").read_text() == (
        workspace["dir"] / "b.ckpt.history.csv"
    ).read_text()


def test_train_manifest_echoes_hyperparameters(workspace):
    ckpt = workspace["dir"] / "net.ckpt"
    run(
        [
            "train", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--variant", "hh", "--pairs", "8", "--epochs", "1", "--seed", "0", "--out", ckpt,
        ]
    )
    manifest = json.loads((workspace["dir"] / "net.ckpt.manifest.json").read_text())
    assert manifest["parameters"]["batch"] == 1024
    assert manifest["parameters"]["lr"] == 0.001
    assert manifest["parameters"]["pairs"] == 8
    assert "lexicon" in manifest["input_digests"]


def test_correct_dictionary_word(workspace, capsys):
    code = run(
        [
            "correct", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--word", "SAGE", "--seed", "0",
        ]
    )
    assert code == 0
    line = capsys.readouterr().out.strip()
    assert line.split("\t") == ["SAGE", "SAGE", "SAGE", "dictionary"]


def test_correct_norvig_fixes_seage(workspace, capsys):
    # a noiseless channel spells SEAGE faithfully; the dictionary misses it
    # and the statistical stage recovers SAGE
    code = run(
        [
            "correct", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--norvig", "--word", "SEAGE", "--seed", "0",
        ]
    )
    assert code == 0
    truth, observed, corrected, provenance = capsys.readouterr().out.strip().split("\t")
    assert (truth, observed) == ("SEAGE", "SEAGE")
    assert corrected == "SAGE"
    assert provenance == "norvig"


def test_correct_with_checkpoint(workspace, capsys):
    ckpt = workspace["dir"] / "net.ckpt"
    save_checkpoint(build(rng=np.random.default_rng(0)), ckpt)
    code = run(
        [
            "correct", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--ckpt", ckpt, "--word", "SCHULE", "--seed", "1",
        ]
    )
    assert code == 0
    parts = capsys.readouterr().out.strip().split("\t")
    assert parts[0] == "SCHULE"
    assert parts[2] == "SCHULE"


def test_correct_stdin(workspace, capsys, monkeypatch):
    import io

    monkeypatch.setattr("sys.stdin", io.StringIO("sage\nlud\n"))
    code = run(
        [
            "correct", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--stdin", "--seed", "0",
        ]
    )
    assert code == 0
    lines = capsys.readouterr().out.strip().split("\n")
    assert len(lines) == 2
    assert lines[0].startswith("SAGE\t")


def test_correct_rejects_bad_characters(workspace, capsys):
    code = run(
        [
            "correct", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--word", "NA-JA", "--seed", "0",
        ]
    )
    assert code == 2


def test_correct_requires_word_or_stdin(workspace):
    code = run(
        ["correct", "--lexicon", workspace["words"], "--model", workspace["model"]]
    )
    assert code == 2


def test_eval_writes_report(workspace, capsys):
    out = workspace["dir"] / "report.csv"
    code = run(
        [
            "eval", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--configs", "hh,n", "--words", "4", "--seed", "0",
            "--pairs", "8", "--epochs", "1", "--batch", "8", "--out", out,
        ]
    )
    assert code == 0
    lines = out.read_text().strip().split("\n")
    assert len(lines) == 1 + 3  # header + argmax baseline + two configs
    assert (workspace["dir"] / "report.csv.table.txt").exists()
    # noiseless channel: everything is perfect
    for line in lines[1:]:
        _, cn, cd, wn, wd, _ = line.split(",")
        assert cn == cd
        assert wn == wd


def test_eval_is_byte_deterministic(workspace):
    args = [
        "eval", "--lexicon", workspace["words"], "--model", workspace["model"],
        "--configs", "hh,hh+n", "--words", "4", "--seed", "1",
        "--pairs", "8", "--epochs", "1", "--batch", "8",
    ]
    a = workspace["dir"] / "a.csv"
    b = workspace["dir"] / "b.csv"
    assert run(args + ["--out", a]) == 0
    assert run(args + ["--out", b]) == 0
    assert a.read_bytes() == b.read_bytes()


def test_eval_rejects_unknown_config(workspace):
    out = workspace["dir"] / "r.csv"
    code = run(
        [
            "eval", "--lexicon", workspace["words"], "--model", workspace["model"],
            "--configs", "zz", "--out", out,
        ]
    )
    assert code == 2


def test_missing_lexicon_is_runtime_error(workspace):
    code = run(
        [
            "correct", "--lexicon", workspace["dir"] / "absent.txt",
            "--model", workspace["model"], "--word", "SAGE",
        ]
    )
    assert code == 1


def test_version_flag(capsys):
    assert run(["--version"]) == 0
    assert "softspell" in capsys.readouterr().out
