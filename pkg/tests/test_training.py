"""Test source training, checkpoints and teacher/student target adaptation."""

import json

import numpy as np
import pytest

from app.core.checkpoint import save_checkpoint
from app.datasets.generator import EVAL, TRAIN, Dataset
from app.evaluation.metrics import evaluate
from app.models.architecture import BackboneConfig, TransformerConfig
from app.models.training import AdaptConfig, LossConfig, MethodArm
from app.nn.network import TransDANet
from app.nn.params import ParamGroup
from app.services.training_service import TrainingService, build_manifest, load_model
from app.utils.exceptions import ContractError, ManifestError

FEATURE_PREFIXES = ("backbone.", "transformer.", "bottleneck.")


def _config(**updates):
    base = AdaptConfig(
        batch_size=16,
        source_epochs=2,
        target_epochs=2,
        bottleneck_dim=8,
        lr_backbone_transformer=0.01,
        lr_bottleneck_classifier=0.05,
        backbone=BackboneConfig(conv_channels=[4, 8], image_side=16),
        transformer=TransformerConfig(num_layers=1, num_heads=2, embed_dim=8),
        seed=0,
    )
    return base.model_copy(update=updates)


@pytest.fixture(scope="module")
def service():
    return TrainingService(show_progress=False)


@pytest.fixture(scope="module")
def source(service, small_benchmark):
    return service.train_source(small_benchmark.source.subset(partition=TRAIN), _config())


def _target(benchmark):
    return benchmark.target.subset(partition=TRAIN), benchmark.target.subset(partition=EVAL)


class TestSourceTraining:
    def test_loss_decreases(self, service, small_benchmark):
        config = _config(source_epochs=6)
        result = service.train_source(small_benchmark.source.subset(partition=TRAIN), config)
        assert len(result.epoch_losses) == 6
        assert result.epoch_losses[-1] < result.epoch_losses[0]
        assert 0.0 <= result.train_accuracy <= 1.0

    def test_separable_toy_set_is_learned(self, service):
        rng = np.random.default_rng(0)
        labels = np.arange(64) % 2
        brightness = np.where(labels == 1, 0.9, 0.1)[:, None, None, None]
        images = np.clip(brightness + rng.normal(0.0, 0.02, size=(64, 3, 16, 16)), 0.0, 1.0)
        toy = Dataset(images=images.astype(np.float32), labels=labels.astype(np.int64),
                      masks=np.ones((64, 16, 16), dtype=np.uint8), shape_ids=labels.astype(np.int64),
                      domains=np.zeros(64, dtype=np.uint8), partitions=np.zeros(64, dtype=np.uint8),
                      domain_names=["toy"], num_classes=2)
        result = service.train_source(toy, _config(source_epochs=15))
        assert result.train_accuracy >= 0.99

    def test_checkpoint_bytes_are_deterministic(self, service, small_benchmark, tmp_path):
        data = small_benchmark.source.subset(partition=TRAIN)
        a = service.train_source(data, _config(source_epochs=1), run_dir=tmp_path / "a")
        b = service.train_source(data, _config(source_epochs=1), run_dir=tmp_path / "b")
        assert a.checkpoint_path.read_bytes() == b.checkpoint_path.read_bytes()

    def test_checkpoint_reproduces_train_accuracy(self, service, small_benchmark, tmp_path):
        data = small_benchmark.source.subset(partition=TRAIN)
        result = service.train_source(data, _config(source_epochs=1), run_dir=tmp_path)
        net, params, extra = load_model(result.checkpoint_path, result.net.manifest)
        assert extra["stage"] == "source"
        assert evaluate(net, params, data).accuracy == extra["source_train_accuracy"] == result.train_accuracy

    def test_cnn_only_variant(self, service, small_benchmark):
        result = service.train_source(small_benchmark.source.subset(partition=TRAIN),
                                      _config(source_epochs=1), use_transformer=False)
        assert not result.params.groups[ParamGroup.TRANSFORMER]

    def test_load_rejects_other_architecture(self, service, small_benchmark, tmp_path):
        result = service.train_source(small_benchmark.source.subset(partition=TRAIN),
                                      _config(source_epochs=1), run_dir=tmp_path)
        expected = build_manifest(_config(bottleneck_dim=4), 3, True)
        with pytest.raises(ManifestError):
            load_model(result.checkpoint_path, expected)

    def test_load_rejects_invalid_model_manifest(self, tmp_path):
        path = save_checkpoint(tmp_path / "broken.ckpt", {}, {"manifest": {"use_transformer": "maybe"}})
        with pytest.raises(ManifestError, match="invalid model manifest"):
            load_model(path)

    def test_too_few_samples(self, service, small_benchmark):
        with pytest.raises(ContractError):
            service.train_source(small_benchmark.source.select(np.array([0])), _config())


class TestTargetAdaptation:
    def test_classifier_is_bitwise_frozen(self, service, source, small_benchmark, tmp_path):
        train, evaluation = _target(small_benchmark)
        before = {n: t.data.copy() for n, t in source.params.group_tensors(ParamGroup.CLASSIFIER)}
        state = service.adapt_target(source.net, source.params, train, _config(), eval_dataset=evaluation,
                                     run_dir=tmp_path)
        for name, tensor in state.student.group_tensors(ParamGroup.CLASSIFIER):
            assert tensor.data.tobytes() == before[name].tobytes()
        for name, tensor in state.teacher.group_tensors(ParamGroup.CLASSIFIER):
            assert tensor.data.tobytes() == before[name].tobytes()
        assert (tmp_path / "student.ckpt").exists() and (tmp_path / "teacher.ckpt").exists()

    def test_source_params_are_not_modified(self, service, source, small_benchmark):
        snapshot = source.params.state_dict()
        service.adapt_target(source.net, source.params, _target(small_benchmark)[0], _config(target_epochs=1))
        for name, value in source.params.state_dict().items():
            np.testing.assert_array_equal(value, snapshot[name])

    def test_teacher_replays_ema_recurrence(self, service, source, small_benchmark):
        momentum = 0.9
        history = []
        service.adapt_target(
            source.net, source.params, _target(small_benchmark)[0],
            _config(target_epochs=1, ema_momentum=momentum),
            on_step=lambda state: history.append((state.teacher.state_dict(), state.student.state_dict())),
        )
        assert len(history) == 3
        previous = source.params.state_dict()
        for teacher, student in history:
            for name in teacher:
                if not name.startswith(FEATURE_PREFIXES):
                    continue
                expected = momentum * previous[name].astype(np.float64) + (1 - momentum) * student[name]
                np.testing.assert_allclose(teacher[name], expected, rtol=1e-6, atol=1e-6)
            previous = teacher

    def test_zero_momentum_teacher_tracks_student(self, service, source, small_benchmark):
        def check(state):
            student = state.student.state_dict()
            for name, value in state.teacher.state_dict().items():
                if name.startswith(FEATURE_PREFIXES):
                    np.testing.assert_array_equal(value, student[name])

        service.adapt_target(source.net, source.params, _target(small_benchmark)[0],
                             _config(target_epochs=1, ema_momentum=0.0), on_step=check)

    def test_unit_momentum_teacher_stays_at_source(self, service, source, small_benchmark):
        state = service.adapt_target(source.net, source.params, _target(small_benchmark)[0],
                                     _config(target_epochs=1, ema_momentum=1.0))
        for name, value in state.teacher.state_dict().items():
            np.testing.assert_array_equal(value, source.params.state_dict()[name])

    def test_information_maximization_only(self, service, source, small_benchmark):
        config = _config(loss=LossConfig(alpha_sl=0.0, beta_kd=0.0))
        state = service.adapt_target(source.net, source.params, _target(small_benchmark)[0], config)
        for record in state.metrics_log:
            assert record.losses.tgt == pytest.approx(record.losses.im, rel=1e-6, abs=1e-7)

    def test_metrics_jsonl_has_one_line_per_epoch(self, service, source, small_benchmark, tmp_path):
        train, evaluation = _target(small_benchmark)
        path = tmp_path / "metrics.jsonl"
        config = _config().for_arm(MethodArm.TRANSFORMER_KD)
        state = service.adapt_target(source.net, source.params, train, config, eval_dataset=evaluation,
                                     metrics_path=path, log_context={"method": "transformer_kd", "seed": 0})
        lines = [json.loads(line) for line in path.read_text().splitlines()]
        assert [line["epoch"] for line in lines] == [1, 2]
        assert {line["method"] for line in lines} == {"transformer_kd"}
        assert all(line["stage"] == "target" for line in lines)
        assert lines[-1]["target_accuracy"] == state.metrics_log[-1].accuracy
        assert all(0.0 <= line["pseudo_label_accuracy"] <= 1.0 for line in lines)

    def test_adaptation_is_deterministic(self, service, source, small_benchmark):
        train = _target(small_benchmark)[0]
        a = service.adapt_target(source.net, source.params, train, _config(target_epochs=1))
        b = service.adapt_target(source.net, source.params, train, _config(target_epochs=1))
        for name, value in a.student.state_dict().items():
            assert value.tobytes() == b.student.state_dict()[name].tobytes()

    def test_metrics_log_bytes_are_reproducible(self, service, source, small_benchmark, tmp_path):
        train, evaluation = _target(small_benchmark)
        for name in ("a", "b"):
            service.adapt_target(source.net, source.params, train, _config(), eval_dataset=evaluation,
                                 run_dir=tmp_path / name, metrics_path=tmp_path / name / "metrics.jsonl",
                                 log_context={"method": "transformer", "seed": 0})
        assert (tmp_path / "a" / "metrics.jsonl").read_bytes() == (tmp_path / "b" / "metrics.jsonl").read_bytes()
        assert (tmp_path / "a" / "teacher.ckpt").read_bytes() == (tmp_path / "b" / "teacher.ckpt").read_bytes()

    def test_pseudo_labels_can_be_dumped(self, service, source, small_benchmark, tmp_path):
        service.adapt_target(source.net, source.params, _target(small_benchmark)[0],
                             _config(target_epochs=1, dump_pseudo_labels=True), run_dir=tmp_path)
        assert (tmp_path / "pseudo_labels_epoch_01.csv").exists()

    def test_manifest_mismatch(self, service, source, small_benchmark):
        other = TransDANet(build_manifest(_config(bottleneck_dim=4), 3, True))
        with pytest.raises(ManifestError):
            service.adapt_target(other, source.params, _target(small_benchmark)[0], _config())
