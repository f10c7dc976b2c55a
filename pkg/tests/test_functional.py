"""Test every differentiable primitive: forward values and finite-difference gradients."""

import numpy as np
import pytest

from app.core import functional as F
from app.core.gradcheck import check_gradients, numerical_gradient, relative_error
from app.core.tensor import Tensor, backward
from app.utils.exceptions import ContractError, DimensionError, NumericDomainError

SEEDS = range(20)


def _t(rng, *shape, positive=False):
    data = rng.uniform(0.2, 1.5, size=shape) if positive else rng.normal(size=shape)
    return Tensor(data, requires_grad=True)


def _case_add(rng):
    a, b = _t(rng, 3, 4), _t(rng, 1, 4)
    return [a, b], lambda: F.add(a, b)


def _case_mul(rng):
    a, b = _t(rng, 2, 3), _t(rng, 2, 1)
    return [a, b], lambda: F.mul(a, b)


def _case_scale(rng):
    a = _t(rng, 5)
    return [a], lambda: F.scale(a, -1.7)


def _case_relu(rng):
    # keep values away from the kink
    data = rng.normal(size=(4, 3))
    data = np.where(np.abs(data) < 0.05, 0.3, data)
    a = Tensor(data, requires_grad=True)
    return [a], lambda: F.relu(a)


def _case_exp(rng):
    a = _t(rng, 3, 2)
    return [a], lambda: F.exp(a)


def _case_log(rng):
    a = _t(rng, 3, 2, positive=True)
    return [a], lambda: F.log(a)


def _case_xlogx(rng):
    a = _t(rng, 6, positive=True)
    return [a], lambda: F.xlogx(a)


def _case_sum(rng):
    a = _t(rng, 2, 3, 4)
    return [a], lambda: F.sum(a, axis=(0, 2), keepdims=True)


def _case_mean(rng):
    a = _t(rng, 2, 3, 4)
    return [a], lambda: F.mean(a, axis=1)


def _case_softmax(rng):
    a = _t(rng, 3, 5)
    return [a], lambda: F.softmax(a, axis=-1)


def _case_log_softmax(rng):
    a = _t(rng, 3, 5)
    return [a], lambda: F.log_softmax(a, axis=1)


def _case_layer_norm(rng):
    x, g, b = _t(rng, 2, 3, 5), _t(rng, 5), _t(rng, 5)
    return [x, g, b], lambda: F.layer_norm(x, g, b)


def _case_batch_norm_2d(rng):
    x, g, b = _t(rng, 4, 3), _t(rng, 3), _t(rng, 3)
    rm, rv = Tensor(np.zeros(3)), Tensor(np.ones(3))
    return [x, g, b], lambda: F.batch_norm(x, g, b, rm, rv, training=True)


def _case_batch_norm_4d(rng):
    x, g, b = _t(rng, 2, 2, 3, 3), _t(rng, 2), _t(rng, 2)
    rm, rv = Tensor(np.zeros(2)), Tensor(np.ones(2))
    return [x, g, b], lambda: F.batch_norm(x, g, b, rm, rv, training=True)


def _case_matmul(rng):
    a, b = _t(rng, 2, 3, 4), _t(rng, 4, 2)
    return [a, b], lambda: F.matmul(a, b)


def _case_conv2d(rng):
    x, w, b = _t(rng, 2, 2, 5, 5), _t(rng, 3, 2, 3, 3), _t(rng, 3)
    return [x, w, b], lambda: F.conv2d(x, w, b, stride=1, padding=1)


def _case_conv2d_strided(rng):
    x, w = _t(rng, 1, 2, 6, 6), _t(rng, 2, 2, 3, 3)
    return [x, w], lambda: F.conv2d(x, w, None, stride=2, padding=0)


def _case_reshape(rng):
    a = _t(rng, 2, 6)
    return [a], lambda: F.reshape(a, (3, 4))


def _case_transpose(rng):
    a = _t(rng, 2, 3, 4)
    return [a], lambda: F.transpose(a, (2, 0, 1))


def _case_concat(rng):
    a, b = _t(rng, 2, 3), _t(rng, 2, 2)
    return [a, b], lambda: F.concat([a, b], axis=1)


def _case_gather_rows(rng):
    a = _t(rng, 4, 3)
    return [a], lambda: F.gather_rows(a, np.array([0, 2, 2, 3]))


def _case_average_pool_global(rng):
    a = _t(rng, 2, 3, 4, 4)
    return [a], lambda: F.average_pool_global(a)


def _case_avg_pool2d(rng):
    a = _t(rng, 2, 2, 4, 4)
    return [a], lambda: F.avg_pool2d(a, 2)


CASES = {
    name[len("_case_"):]: fn for name, fn in sorted(globals().items()) if name.startswith("_case_")
}


@pytest.mark.parametrize("seed", SEEDS)
@pytest.mark.parametrize("op", sorted(CASES))
def test_gradients_match_central_differences(float64, op, seed):
    rng = np.random.default_rng(seed)
    inputs, build = CASES[op](rng)
    weight_rng = np.random.default_rng(1000 + seed)
    weights = None

    def loss():
        nonlocal weights
        out = build()
        if weights is None:
            weights = Tensor(weight_rng.normal(size=out.shape))
        return F.sum(F.mul(out, weights))

    result = check_gradients(loss, inputs)
    assert result.passed, f"{op}: relative error {result.max_relative_error:.2e}"


def _naive_conv(x, w, b, padding):
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding)))
    n, _, h, wd = xp.shape
    oc, _, kh, kw = w.shape
    out = np.zeros((n, oc, h - kh + 1, wd - kw + 1))
    for i in range(out.shape[2]):
        for j in range(out.shape[3]):
            patch = xp[:, :, i:i + kh, j:j + kw]
            out[:, :, i, j] = np.tensordot(patch, w, axes=([1, 2, 3], [1, 2, 3])) + b
    return out


def test_conv2d_matches_naive_loops(float64, rng):
    x, w, b = rng.normal(size=(2, 3, 6, 6)), rng.normal(size=(4, 3, 3, 3)), rng.normal(size=4)
    out = F.conv2d(Tensor(x), Tensor(w), Tensor(b), padding=1)
    np.testing.assert_allclose(out.data, _naive_conv(x, w, b, 1), rtol=0, atol=1e-12)


def test_layer_norm_normalizes_last_axis(float64, rng):
    x = Tensor(rng.normal(3.0, 2.0, size=(4, 7)))
    out = F.layer_norm(x, Tensor(np.ones(7)), Tensor(np.zeros(7)), eps=1e-12)
    np.testing.assert_allclose(out.data.mean(axis=-1), 0.0, atol=1e-12)
    np.testing.assert_allclose(out.data.std(axis=-1), 1.0, atol=1e-9)


def test_batch_norm_updates_running_stats_in_training(float64):
    x = Tensor(np.array([[1.0], [3.0]]))
    rm, rv = Tensor(np.zeros(1)), Tensor(np.ones(1))
    F.batch_norm(x, Tensor(np.ones(1)), Tensor(np.zeros(1)), rm, rv, training=True)
    assert rm.data[0] == pytest.approx(0.1 * 2.0)
    # unbiased batch variance is 2
    assert rv.data[0] == pytest.approx(0.9 + 0.1 * 2.0)


def test_batch_norm_eval_mode_reads_buffers_only(float64):
    x = Tensor(np.array([[4.0], [6.0]]))
    rm, rv = Tensor(np.array([2.0])), Tensor(np.array([4.0]))
    out = F.batch_norm(x, Tensor(np.ones(1)), Tensor(np.zeros(1)), rm, rv, training=False, eps=0.0)
    np.testing.assert_allclose(out.data[:, 0], [1.0, 2.0])
    assert rm.data[0] == 2.0 and rv.data[0] == 4.0


def test_batch_norm_training_needs_two_values():
    x = Tensor(np.ones((1, 3)))
    with pytest.raises(ContractError):
        F.batch_norm(x, Tensor(np.ones(3)), Tensor(np.zeros(3)), Tensor(np.zeros(3)), Tensor(np.ones(3)),
                     training=True)


def test_log_rejects_non_positive():
    with pytest.raises(NumericDomainError):
        F.log(Tensor([1.0, 0.0]))


def test_xlogx_zero_convention(float64):
    out = F.xlogx(Tensor([0.0, 1.0, np.e]))
    np.testing.assert_allclose(out.data, [0.0, 0.0, np.e])


def test_softmax_rows_sum_to_one_and_are_shift_invariant(float64, rng):
    x = rng.normal(size=(3, 4))
    a = F.softmax(Tensor(x)).data
    b = F.softmax(Tensor(x + 100.0)).data
    np.testing.assert_allclose(a.sum(axis=1), 1.0, atol=1e-12)
    np.testing.assert_allclose(a, b, atol=1e-12)


def test_matmul_shape_mismatch_names_op():
    with pytest.raises(DimensionError, match="matmul"):
        F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((2, 3))))


def test_gather_rows_accumulates_repeated_indices(float64):
    x = Tensor(np.arange(6.0).reshape(3, 2), requires_grad=True)
    backward(F.sum(F.gather_rows(x, [1, 1, 2])))
    np.testing.assert_allclose(x.grad, [[0, 0], [2, 2], [1, 1]])


def test_gather_rows_rejects_out_of_range():
    with pytest.raises(DimensionError):
        F.gather_rows(Tensor(np.ones((2, 2))), [2])


def test_avg_pool2d_rejects_odd_sizes():
    with pytest.raises(DimensionError):
        F.avg_pool2d(Tensor(np.ones((1, 1, 3, 3))), 2)


def test_relative_error_is_per_element():
    analytic = np.array([100.0, 0.002])
    numeric = np.array([100.0, 0.001])
    assert relative_error(analytic, numeric) == pytest.approx(0.5)


def test_relative_error_floors_vanishing_gradients():
    assert relative_error(np.array([1e-12, 0.0]), np.array([0.0, 1e-12])) < 1e-6


def test_wrong_small_entry_is_not_hidden_by_a_large_one(float64):
    a = Tensor(np.array([10.0, 0.01]), requires_grad=True)
    numeric = numerical_gradient(lambda: F.sum(F.mul(a, a)), a)
    np.testing.assert_allclose(numeric, [20.0, 0.02], rtol=1e-6)
    assert relative_error(np.array([20.0, 0.04]), numeric) > 0.4
