"""Command line workflow: every subcommand end to end on a tiny corpus,
seed determinism of artifacts, and diagnostic exit codes."""

import json
import xml.etree.ElementTree as ET

import pytest

from locoforecast.cli import main
from locoforecast.dataset import load_dataset

FAST_CONFIG = {
    "t_p": 8, "t_f": 8, "d_ae": 6,
    "n_local": 2, "n_global": 1,
    "qrnn_hidden": 12, "frame_encoder_hidden": 8,
    "completion_steps": 60, "completion_batch": 16,
    "codec_steps": 40, "seq_epochs": 1, "seq_batch": 4,
    "seed": 11,
}


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Generated corpus plus a fully trained bundle under the fast config."""
    root = tmp_path_factory.mktemp("cli")
    cfg_path = root / "config.json"
    cfg_path.write_text(json.dumps(FAST_CONFIG))
    cfg = ["--config", str(cfg_path)]
    data = str(root / "data" / "noisy.jsonl")
    bundle = ["--bundle", str(root / "bundle")]

    assert main(["generate", "--out", str(root / "data"), "--scenes", "6"] + cfg) == 0
    assert main(["train-completion", "--data", data] + bundle + cfg) == 0
    assert main(["train-local", "--data", data] + bundle + cfg) == 0
    assert main(["train-global", "--data", data] + bundle + cfg) == 0
    assert main(["train-entangled", "--data", data] + bundle + cfg) == 0
    return root


def test_version_flag(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "locoforecast" in capsys.readouterr().out


def test_generate_outputs(workspace):
    noisy = load_dataset(workspace / "data" / "noisy.jsonl")
    clean = load_dataset(workspace / "data" / "clean.jsonl")
    assert len(noisy) == len(clean) == 6
    for n, c in zip(noisy, clean):
        assert n.pedestrian_id == c.pedestrian_id
        assert (n.t_p, n.t_f) == (8, 8)


def test_bundle_contents(workspace):
    bundle = workspace / "bundle"
    for name in ("completion.ckpt", "local.ckpt", "global.ckpt", "entangled.ckpt"):
        assert (bundle / name).stat().st_size > 0
    manifest = json.loads((bundle / "manifest.json").read_text())
    assert manifest["schema_version"] == 1
    assert manifest["config"]["t_p"] == 8
    assert manifest["config"]["seed"] == 11


def test_forecast_and_plot_render_svg(workspace, capsys):
    out = workspace / "forecast.svg"
    args = ["--data", str(workspace / "data" / "noisy.jsonl"),
            "--bundle", str(workspace / "bundle")]
    assert main(["forecast", "--index", "1", "--out", str(out), "--show-truth"] + args) == 0
    assert "KDE" in capsys.readouterr().out
    assert ET.fromstring(out.read_text()).tag.endswith("svg")

    assert main(["forecast", "--subject", "entangled", "--out", str(out)] + args) == 0

    plot = workspace / "history.svg"
    assert main(["plot", "--data", args[1], "--index", "2", "--out", str(plot)]) == 0
    ET.fromstring(plot.read_text())


def test_evaluate_baseline_and_pipeline(workspace):
    data = str(workspace / "data" / "noisy.jsonl")
    truth = str(workspace / "data" / "clean.jsonl")
    bundle = str(workspace / "bundle")

    out = workspace / "report-zv"
    assert main(["evaluate", "--data", data, "--truth", truth,
                 "--subject", "zero-velocity", "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["records_evaluated"] == 6
    assert report["aggregate"]["kde"] > 0.0

    out = workspace / "report-pipe"
    assert main(["evaluate", "--data", data, "--truth", truth, "--subject", "pipeline",
                 "--stream", "global", "--bundle", bundle, "--out", str(out)]) == 0
    assert json.loads((out / "report.json").read_text())["stream"] == "global"

    out = workspace / "report-ent"
    assert main(["evaluate", "--data", data, "--subject", "entangled",
                 "--bundle", bundle, "--out", str(out)]) == 0
    assert (out / "kde_by_horizon.png").exists()


def test_bundle_manifest_resolves_config(workspace, capsys):
    # no --config: the manifest supplies t_p=8 budgets, so evaluate agrees
    out = workspace / "report-manifest"
    assert main(["evaluate", "--data", str(workspace / "data" / "noisy.jsonl"),
                 "--subject", "pipeline", "--bundle", str(workspace / "bundle"),
                 "--out", str(out)]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["config"]["t_p"] == 8


def test_same_seed_bit_identical_artifacts(workspace, tmp_path):
    cfg = ["--config", str(workspace / "config.json")]
    for sub in ("a", "b"):
        d = tmp_path / sub
        assert main(["generate", "--out", str(d), "--scenes", "2"] + cfg) == 0
        assert main(["train-completion", "--data", str(d / "noisy.jsonl"),
                     "--bundle", str(d / "bundle")] + cfg) == 0
    assert (tmp_path / "a" / "noisy.jsonl").read_bytes() == \
           (tmp_path / "b" / "noisy.jsonl").read_bytes()
    assert (tmp_path / "a" / "bundle" / "completion.ckpt").read_bytes() == \
           (tmp_path / "b" / "bundle" / "completion.ckpt").read_bytes()


def test_seed_override_changes_generation(workspace, tmp_path):
    cfg = ["--config", str(workspace / "config.json")]
    main(["generate", "--out", str(tmp_path / "s1"), "--scenes", "2", "--seed", "1"] + cfg)
    main(["generate", "--out", str(tmp_path / "s2"), "--scenes", "2", "--seed", "2"] + cfg)
    assert (tmp_path / "s1" / "noisy.jsonl").read_bytes() != \
           (tmp_path / "s2" / "noisy.jsonl").read_bytes()


def _fails_with(capsys, argv, fragment):
    assert main(argv) == 1
    assert fragment in capsys.readouterr().err


def test_error_paths(workspace, tmp_path, capsys):
    data = str(workspace / "data" / "noisy.jsonl")
    _fails_with(capsys, ["train-completion", "--data", str(tmp_path / "nope.jsonl"),
                         "--bundle", str(tmp_path / "b")], "dataset not found")
    _fails_with(capsys, ["evaluate", "--data", data, "--subject", "pipeline",
                         "--out", str(tmp_path / "r")], "--bundle is required")
    _fails_with(capsys, ["forecast", "--data", data, "--bundle", str(tmp_path / "empty"),
                         "--out", str(tmp_path / "x.svg")], "train that stage first")
    _fails_with(capsys, ["plot", "--data", data, "--index", "99",
                         "--out", str(tmp_path / "x.svg")], "out of range")
    _fails_with(capsys, ["generate", "--out", str(tmp_path / "g"), "--scenes", "0"],
                "--scenes must be >= 1")

    bad = tmp_path / "bad.jsonl"
    bad.write_text("{broken\n")
    _fails_with(capsys, ["plot", "--data", str(bad), "--out", str(tmp_path / "x.svg")],
                "invalid JSON")


def test_config_mismatch_guard(workspace, tmp_path, capsys):
    # a bundle refuses checkpoints trained under a different config
    other = dict(FAST_CONFIG, qrnn_hidden=16)
    other_path = tmp_path / "other.json"
    other_path.write_text(json.dumps(other))
    assert main(["train-global", "--data", str(workspace / "data" / "noisy.jsonl"),
                 "--bundle", str(workspace / "bundle"),
                 "--config", str(other_path)]) == 1
    err = capsys.readouterr().err
    assert "different config" in err and "qrnn_hidden" in err
