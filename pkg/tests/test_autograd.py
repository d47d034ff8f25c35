"""Gradient checks and behaviour of the autograd primitives."""

import numpy as np
import pytest

from src.autograd import Tensor, backward, no_grad
from src.autograd import functional as F
from src.exceptions import ConfigError, DimensionError
from tests.conftest import max_rel_error, numeric_grad


def check_gradients(op, arrays, rng, tol=1e-5):
    """Compare analytic and central-difference gradients of sum(op(*inputs) * R)."""
    probe = op(*[Tensor(a) for a in arrays])
    weights = rng.normal(size=probe.shape)

    def value():
        return float((op(*[Tensor(a) for a in arrays]).data * weights).sum())

    tensors = [Tensor(a, requires_grad=True) for a in arrays]
    backward(F.sum(F.mul(op(*tensors), Tensor(weights))))
    for tensor, array in zip(tensors, arrays):
        assert max_rel_error(tensor.grad, numeric_grad(value, array)) < tol


@pytest.mark.parametrize("op,shapes", [
    (lambda a, b: a + b, [(3, 4), (4,)]),
    (lambda a, b: a - b, [(2, 3, 4), (3, 4)]),
    (lambda a, b: a * b, [(3, 4), (3, 1)]),
    (lambda a, b: a @ b, [(2, 3, 4), (4, 5)]),
    (lambda a: F.transpose(a, (0, 2, 1)), [(2, 3, 4)]),
    (lambda a: F.reshape(a, (6, 2)), [(3, 4)]),
    (lambda a: F.sum(a, axis=1), [(3, 4)]),
    (lambda a: F.mean(a, axis=0, keepdims=True), [(3, 4)]),
    (lambda a: a[:, 1], [(3, 4)]),
    (lambda a, b: F.stack([a, b], axis=1), [(3, 4), (3, 4)]),
    (lambda a, b: F.concat_lastdim([a, b]), [(2, 3), (2, 5)]),
    (F.sigmoid, [(3, 4)]),
    (F.tanh, [(3, 4)]),
    (F.gelu, [(3, 4)]),
    (lambda a: F.softmax_lastdim(a), [(2, 5)]),
])
def test_primitive_gradients(op, shapes, rng):
    check_gradients(op, [rng.normal(size=s) for s in shapes], rng)


def test_masked_softmax_gradient(rng):
    mask = np.array([[1, 1, 1, 0], [1, 0, 0, 0]])
    check_gradients(lambda a: F.softmax_lastdim(a, mask), [rng.normal(size=(2, 4))], rng)


def test_layer_norm_gradient(rng):
    x = rng.normal(size=(2, 3, 6))
    gain = rng.normal(size=6) + 1.0
    bias = rng.normal(size=6)
    check_gradients(F.layer_norm, [x, gain, bias], rng)


def test_embedding_gradient_scatters_repeated_ids(rng):
    ids = np.array([[0, 2, 2], [1, 2, 0]])
    check_gradients(lambda table: F.embedding_lookup(table, ids), [rng.normal(size=(4, 3))], rng)

    table = Tensor(np.zeros((4, 3)), requires_grad=True)
    backward(F.sum(F.embedding_lookup(table, ids)))
    np.testing.assert_array_equal(table.grad[:, 0], [2, 1, 3, 0])


def test_bce_gradient_and_value(rng):
    targets = np.array([[1, 0, 1], [0, 0, 1]])
    check_gradients(lambda z: F.binary_cross_entropy_with_logits(z, targets), [rng.normal(size=(2, 3))], rng)

    z = np.array([[0.3, -1.2, 2.0], [0.0, 0.5, -0.7]])
    p = 1 / (1 + np.exp(-z))
    expected = -(targets * np.log(p) + (1 - targets) * np.log(1 - p)).sum() / 2
    assert F.binary_cross_entropy_with_logits(Tensor(z), targets).item() == pytest.approx(expected, rel=1e-12)


def test_bce_is_stable_for_extreme_logits():
    z = Tensor(np.array([[1000.0, -1000.0]]), requires_grad=True)
    loss = F.binary_cross_entropy_with_logits(z, np.array([[1, 1]]))
    assert loss.item() == pytest.approx(1000.0)
    backward(loss)
    assert np.all(np.isfinite(z.grad))
    np.testing.assert_allclose(z.grad, [[0.0, -1.0]], atol=1e-12)


def test_reused_tensor_accumulates_gradient():
    x = Tensor(np.array([3.0]), requires_grad=True)
    backward(F.sum(x * x + x))
    np.testing.assert_allclose(x.grad, [7.0])


def test_gradients_accumulate_across_backward_calls():
    x = Tensor(np.array([1.0, 2.0]), requires_grad=True)
    backward(F.sum(x * 2.0))
    backward(F.sum(x * 3.0))
    np.testing.assert_allclose(x.grad, [5.0, 5.0])
    x.zero_grad()
    assert x.grad is None


def test_no_grad_records_nothing():
    x = Tensor(np.ones(3), requires_grad=True)
    with no_grad():
        y = F.sum(x * 2.0)
    assert not y.requires_grad
    with pytest.raises(ValueError):
        backward(y)


def test_backward_requires_scalar():
    x = Tensor(np.ones(3), requires_grad=True)
    with pytest.raises(DimensionError):
        backward(x * 2.0)


def test_matmul_shape_mismatch():
    with pytest.raises(DimensionError):
        F.matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 2))))


def test_masked_entries_get_exactly_zero_weight():
    scores = Tensor(np.array([[5.0, 1.0, 100.0], [0.0, 0.0, 0.0]]))
    out = F.softmax_lastdim(scores, np.array([[1, 1, 0], [0, 0, 0]])).data
    assert out[0, 2] == 0.0
    assert out[0, :2].sum() == pytest.approx(1.0)
    np.testing.assert_array_equal(out[1], 0.0)


def test_dropout_modes(rng):
    x = Tensor(np.ones((200, 50)))
    assert F.dropout(x, 0.5, training=False, rng=None) is x
    dropped = F.dropout(x, 0.5, training=True, rng=rng).data
    assert set(np.unique(dropped)) <= {0.0, 2.0}
    assert dropped.mean() == pytest.approx(1.0, abs=0.05)
    with pytest.raises(ConfigError):
        F.dropout(x, 1.0, training=True, rng=rng)


def test_embedding_rejects_out_of_range_ids():
    with pytest.raises(IndexError):
        F.embedding_lookup(Tensor(np.zeros((4, 2))), np.array([1, 4]))


def test_unbroadcast_sums_expanded_axes():
    grad = np.ones((2, 3, 4))
    np.testing.assert_array_equal(F.unbroadcast(grad, (4,)), np.full(4, 6.0))
    np.testing.assert_array_equal(F.unbroadcast(grad, (3, 1)), np.full((3, 1), 8.0))


def test_float32_tensors_keep_dtype():
    x = Tensor(np.ones((2, 2), dtype=np.float32), requires_grad=True)
    y = F.sigmoid(x @ x)
    assert y.dtype == np.float32


def test_softmax_is_stable_for_large_scores():
    out = F.softmax_lastdim(Tensor(np.array([[1000.0, 0.0]]))).data
    np.testing.assert_allclose(out, [[1.0, 0.0]])
    assert np.all(np.isfinite(out))
