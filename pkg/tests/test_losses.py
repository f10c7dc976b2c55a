"""Test the source loss, information maximization, self-labeling and distillation."""

import numpy as np
import pytest

from app.adaptation.losses import (
    ce_smooth,
    im_loss,
    kd_loss,
    one_hot,
    sl_loss,
    total_target_loss,
)
from app.core.gradcheck import check_gradients
from app.core.tensor import Tensor
from app.models.training import LossConfig
from app.utils.exceptions import ContractError, DimensionError


def _scalar_softmax(row):
    e = [np.exp(v - max(row)) for v in row]
    s = sum(e)
    return [x / s for x in e]


def _scalar_im(logits):
    b, k = logits.shape
    probs = [_scalar_softmax(list(row)) for row in logits]
    entropy = -sum(p * np.log(p) for row in probs for p in row) / b
    marginal = [sum(row[c] for row in probs) / b for c in range(k)]
    return entropy + sum(m * np.log(m) for m in marginal)


class TestCeSmooth:
    def test_uniform_logits_give_ln2(self, float64):
        loss = ce_smooth(Tensor(np.zeros((1, 2))), np.array([0]), 0.1)
        assert abs(loss.item() - np.log(2.0)) < 1e-12

    def test_matches_scalar_evaluation(self, float64):
        logits = np.array([[1.0, 0.0, 0.0]])
        probs = _scalar_softmax([1.0, 0.0, 0.0])
        targets = [0.9 + 0.1 / 3, 0.1 / 3, 0.1 / 3]
        expected = -sum(t * np.log(p) for t, p in zip(targets, probs))
        assert ce_smooth(Tensor(logits), np.array([0]), 0.1).item() == pytest.approx(expected, abs=1e-12)

    def test_gradient(self, float64, rng):
        logits = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        labels = np.array([0, 2, 1, 2])
        assert check_gradients(lambda: ce_smooth(logits, labels, 0.1), [logits]).passed

    def test_rejects_out_of_range_labels(self, float64):
        with pytest.raises(ContractError):
            ce_smooth(Tensor(np.zeros((1, 2))), np.array([2]), 0.1)

    def test_rejects_bad_smoothing(self, float64):
        with pytest.raises(ContractError):
            ce_smooth(Tensor(np.zeros((1, 2))), np.array([0]), 1.0)


class TestImLoss:
    def test_uniform_batch_is_zero(self, float64):
        assert abs(im_loss(Tensor(np.zeros((5, 4)))).item()) < 1e-9

    def test_confident_balanced_batch_reaches_minimum(self, float64):
        k = 4
        loss = im_loss(Tensor(50.0 * np.eye(k))).item()
        assert abs(loss + np.log(k)) < 1e-6

    def test_matches_scalar_reference(self, float64, rng):
        logits = rng.normal(size=(4, 3))
        assert im_loss(Tensor(logits)).item() == pytest.approx(_scalar_im(logits), abs=1e-12)

    def test_bounded(self, float64, rng):
        k = 3
        for _ in range(20):
            value = im_loss(Tensor(rng.normal(scale=4.0, size=(6, k)))).item()
            assert -np.log(k) - 1e-9 <= value <= np.log(k) + 1e-9

    def test_shift_invariance(self, float64, rng):
        logits = rng.normal(size=(5, 3))
        shifted = logits + rng.normal(size=(5, 1))
        assert im_loss(Tensor(logits)).item() == pytest.approx(im_loss(Tensor(shifted)).item(), abs=1e-12)

    def test_gradient(self, float64, rng):
        logits = Tensor(rng.normal(size=(4, 3)), requires_grad=True)
        assert check_gradients(lambda: im_loss(logits), [logits]).passed

    def test_rejects_non_matrix(self, float64):
        with pytest.raises(DimensionError):
            im_loss(Tensor(np.zeros(3)))


class TestSelfLabeling:
    def test_uniform_logits_give_ln2(self, float64):
        assert abs(sl_loss(Tensor(np.zeros((1, 2))), np.array([0])).item() - np.log(2.0)) < 1e-12

    def test_matches_scalar_cross_entropy(self, float64, rng):
        logits = rng.normal(size=(3, 4))
        labels = np.array([3, 0, 1])
        expected = -np.mean([np.log(_scalar_softmax(list(row))[y]) for row, y in zip(logits, labels)])
        assert sl_loss(Tensor(logits), labels).item() == pytest.approx(expected, abs=1e-12)

    def test_gradient(self, float64, rng):
        logits = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        assert check_gradients(lambda: sl_loss(logits, np.array([1, 1, 3])), [logits]).passed

    def test_length_mismatch(self, float64):
        with pytest.raises(DimensionError):
            sl_loss(Tensor(np.zeros((2, 2))), np.array([0]))


class TestDistillation:
    def test_uniform_targets_give_ln_k(self, float64):
        k = 5
        targets = np.full((2, k), 1.0 / k)
        assert kd_loss(Tensor(np.zeros((2, k))), targets).item() == pytest.approx(np.log(k), abs=1e-12)

    def test_one_hot_targets_equal_self_labeling_bitwise(self, float64, rng):
        logits = rng.normal(size=(6, 3))
        labels = np.array([0, 1, 2, 2, 1, 0])
        kd = kd_loss(Tensor(logits), one_hot(labels, 3)).item()
        sl = sl_loss(Tensor(logits), labels).item()
        assert kd == sl

    def test_matches_scalar_oracle(self, float64, rng):
        logits = rng.normal(size=(3, 3))
        soft = rng.dirichlet(np.ones(3), size=3)
        expected = -np.mean([
            sum(t * np.log(p) for t, p in zip(target, _scalar_softmax(list(row))))
            for row, target in zip(logits, soft)
        ])
        assert kd_loss(Tensor(logits), soft).item() == pytest.approx(expected, abs=1e-12)

    def test_gradient(self, float64, rng):
        logits = Tensor(rng.normal(size=(3, 4)), requires_grad=True)
        soft = rng.dirichlet(np.ones(4), size=3)
        assert check_gradients(lambda: kd_loss(logits, soft), [logits]).passed

    def test_rows_must_sum_to_one(self, float64):
        with pytest.raises(ContractError):
            kd_loss(Tensor(np.zeros((1, 2))), np.array([[0.5, 0.6]]))

    def test_negative_entries_rejected(self, float64):
        with pytest.raises(ContractError):
            kd_loss(Tensor(np.zeros((1, 2))), np.array([[1.5, -0.5]]))


def test_total_target_loss_uses_configured_weights(float64):
    one = Tensor(np.array(1.0))
    total = total_target_loss(one, one, one, LossConfig())
    assert total.item() == pytest.approx(2.3, abs=1e-12)


def test_total_target_loss_with_distillation_off(float64):
    one = Tensor(np.array(1.0))
    total = total_target_loss(one, one, one, LossConfig(beta_kd=0.0))
    assert total.item() == pytest.approx(1.3, abs=1e-12)
