"""Test the transda command line end to end on a tiny benchmark."""

import json
import struct
from pathlib import Path

import pandas as pd
import pytest

from app.datasets.splits import make_benchmark, max_classes
from app.datasets.storage import save_dataset
from app.main import main
from app.models.training import SplitMode

TINY_CONFIG = Path(__file__).resolve().parents[1] / "data" / "configs" / "tiny.cfg"


@pytest.fixture(scope="module")
def dataset_path(tmp_path_factory):
    benchmark = make_benchmark(SplitMode.CLOSED, 3, seed=2, per_domain=32, eval_per_domain=16, image_side=16)
    return save_dataset(tmp_path_factory.mktemp("data") / "bench.tdds", benchmark)


def _run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def _json(out):
    return json.loads(out)


def test_generate_data(tmp_path, capsys):
    target = tmp_path / "open.tdds"
    code, out, _ = _run(capsys, "generate-data", "--mode", "open", "--classes", "4", "--per-domain", "8",
                        "--eval-per-domain", "4", "--image-side", "16", "--out", str(target))
    assert code == 0
    payload = _json(out)
    assert payload["unknown_shape_ids"] == [4, 5]
    assert payload["source_samples"] == payload["target_samples"] == 12
    assert target.exists()


def test_unknown_flag_prints_usage(capsys):
    code, _, err = _run(capsys, "generate-data", "--out", "x.tdds", "--colour", "red")
    assert code == 1
    assert "usage:" in err


def test_missing_subcommand(capsys):
    assert _run(capsys)[0] == 1


def test_invalid_split_for_class_count(tmp_path, capsys):
    code, _, _ = _run(capsys, "generate-data", "--mode", "partial", "--classes", "3",
                      "--out", str(tmp_path / "p.tdds"))
    assert code == 1


def test_corrupt_dataset_is_a_format_error(tmp_path, capsys):
    bad = tmp_path / "bad.tdds"
    bad.write_bytes(b"TDDS" + b"\x00" * 5)
    code, _, err = _run(capsys, "train-source", "--config", str(TINY_CONFIG), "--dataset", str(bad),
                        "--out", str(tmp_path))
    assert code == 2
    assert "DataFormatError" in err


def test_missing_dataset_is_a_config_error(tmp_path, capsys):
    code, _, _ = _run(capsys, "train-source", "--config", str(TINY_CONFIG), "--out", str(tmp_path))
    assert code == 1


def test_unknown_config_key(tmp_path, capsys, dataset_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("learning_rate = 0.1\n")
    code, _, _ = _run(capsys, "train-source", "--config", str(cfg), "--dataset", str(dataset_path))
    assert code == 1


def test_train_evaluate_adapt(tmp_path, capsys, dataset_path):
    source_dir = tmp_path / "source"
    code, out, _ = _run(capsys, "train-source", "--config", str(TINY_CONFIG), "--dataset", str(dataset_path),
                        "--out", str(source_dir), "--source-epochs", "1")
    assert code == 0
    trained = _json(out)
    checkpoint = trained["checkpoint"]

    code, out, _ = _run(capsys, "evaluate", "--checkpoint", checkpoint, "--dataset", str(dataset_path),
                        "--domain", "source", "--partition", "train")
    assert code == 0
    assert _json(out)["accuracy"] == trained["source_train_accuracy"]

    adapt_dir = tmp_path / "adapt"
    code, out, _ = _run(capsys, "adapt-target", "--config", str(TINY_CONFIG), "--dataset", str(dataset_path),
                        "--checkpoint", checkpoint, "--out", str(adapt_dir), "--method", "transformer_kd",
                        "--target-epochs", "2")
    assert code == 0
    lines = [json.loads(line) for line in (adapt_dir / "metrics.jsonl").read_text().splitlines()]
    assert len(lines) == 2
    summary = pd.read_csv(adapt_dir / "summary.csv")
    assert list(summary.columns) == ["method", "seed", "accuracy", "attention_overlap", "pseudo_label_accuracy"]
    mean_accuracy = sum(line["target_accuracy"] for line in lines) / len(lines)
    assert summary.loc[0, "accuracy"] == pytest.approx(mean_accuracy, abs=1e-6)
    assert (adapt_dir / "student.ckpt").exists()


def test_adapt_rejects_mismatched_architecture(tmp_path, capsys, dataset_path):
    code, out, _ = _run(capsys, "train-source", "--config", str(TINY_CONFIG), "--dataset", str(dataset_path),
                        "--out", str(tmp_path), "--source-epochs", "1")
    assert code == 0
    checkpoint = _json(out)["checkpoint"]
    cfg = tmp_path / "wide.cfg"
    cfg.write_text(TINY_CONFIG.read_text().replace("bottleneck_dim = 8", "bottleneck_dim = 16"))
    code, _, _ = _run(capsys, "adapt-target", "--config", str(cfg), "--dataset", str(dataset_path),
                      "--checkpoint", checkpoint, "--out", str(tmp_path / "adapt"))
    assert code == 2


def test_adapt_rejects_non_adapting_method(tmp_path, capsys, dataset_path):
    code, _, _ = _run(capsys, "adapt-target", "--config", str(TINY_CONFIG), "--dataset", str(dataset_path),
                        "--checkpoint", str(tmp_path / "x.ckpt"), "--method", "source_only")
    assert code == 1


def test_output_dir_from_environment(tmp_path, capsys, dataset_path, monkeypatch):
    monkeypatch.setenv("TRANSDA_OUTPUT_DIR", str(tmp_path / "env_runs"))
    code, out, _ = _run(capsys, "train-source", "--config", str(TINY_CONFIG), "--dataset", str(dataset_path),
                        "--source-epochs", "1")
    assert code == 0
    assert Path(_json(out)["checkpoint"]).parent == tmp_path / "env_runs"


def test_dataset_with_unknown_split_mode_is_a_format_error(dataset_path, tmp_path, capsys):
    payload = dataset_path.read_bytes()
    magic, version, length = struct.unpack_from("<4sIQ", payload, 0)
    manifest = json.loads(payload[16:16 + length])
    manifest["split"]["mode"] = "bogus"
    encoded = json.dumps(manifest).encode("utf-8")
    broken = tmp_path / "broken.tdds"
    broken.write_bytes(struct.pack("<4sIQ", magic, version, len(encoded)) + encoded + payload[16 + length:])
    code, out, _ = _run(capsys, "train-source", "--config", str(TINY_CONFIG), "--dataset", str(dataset_path),
                        "--out", str(tmp_path / "train"), "--source-epochs", "1")
    assert code == 0
    code, _, err = _run(capsys, "evaluate", "--checkpoint", _json(out)["checkpoint"],
                        "--dataset", str(broken), "--config", str(TINY_CONFIG))
    assert code == 2
    assert "Corrupt dataset manifest" in err


def test_same_seed_runs_write_identical_logs(tmp_path, capsys, dataset_path):
    code, out, _ = _run(capsys, "train-source", "--config", str(TINY_CONFIG), "--dataset", str(dataset_path),
                        "--out", str(tmp_path / "source"), "--source-epochs", "1")
    assert code == 0
    checkpoint = _json(out)["checkpoint"]
    for name in ("a", "b"):
        code, _, _ = _run(capsys, "adapt-target", "--config", str(TINY_CONFIG), "--dataset", str(dataset_path),
                          "--checkpoint", checkpoint, "--out", str(tmp_path / name), "--method", "transformer_kd",
                          "--target-epochs", "2")
        assert code == 0
    for artifact in ("metrics.jsonl", "summary.csv"):
        assert (tmp_path / "a" / artifact).read_bytes() == (tmp_path / "b" / artifact).read_bytes()


def test_generate_help_states_the_open_class_limit(capsys):
    with pytest.raises(SystemExit):
        main(["generate-data", "--help"])
    help_text = " ".join(capsys.readouterr().out.split())
    assert f"{max_classes(SplitMode.OPEN)} for open splits" in help_text
