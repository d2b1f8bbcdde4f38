"""Tests for the autodiff core: conv1d, dense, losses, backward, Adam."""

import numpy as np
import numpy.testing as npt
import pytest

from trackcast import autodiff as ad
from trackcast.errors import (ConfigurationError, DimensionError, NumericError,
                              UsageError)
from trackcast.gradcheck import finite_difference_check
from trackcast.optim import AdamState, adam_step


def conv1d_bruteforce(x, w, b):
    """Independent triple-sum evaluation of same-padding 1D convolution."""
    cout, cin, width = w.shape
    length = x.shape[1]
    pad = (width - 1) // 2
    out = np.zeros((cout, length))
    for c in range(cout):
        for l in range(length):
            acc = b[c]
            for ci in range(cin):
                for k in range(width):
                    j = l + k - pad
                    if 0 <= j < length:
                        acc += w[c, ci, k] * x[ci, j]
            out[c, l] = acc
    return out


class TestConv1d:
    def test_identity_kernel(self):
        y = ad.conv1d(ad.constant([[1.0, 2.0, 3.0]]),
                      ad.constant([[[1.0]]]), ad.constant([0.0]))
        npt.assert_array_equal(y.data, [[1.0, 2.0, 3.0]])

    def test_zero_input_gives_bias(self):
        rng = np.random.default_rng(1)
        w = ad.constant(rng.normal(size=(3, 2, 5)))
        b = ad.constant([4.0, -1.0, 0.5])
        y = ad.conv1d(ad.constant(np.zeros((2, 9))), w, b)
        npt.assert_array_equal(y.data, np.tile([[4.0], [-1.0], [0.5]], (1, 9)))

    def test_random_against_bruteforce(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=(2, 8))
        w = rng.normal(size=(3, 2, 3))
        b = rng.normal(size=3)
        y = ad.conv1d(ad.constant(x), ad.constant(w), ad.constant(b))
        npt.assert_allclose(y.data, conv1d_bruteforce(x, w, b), rtol=0, atol=1e-14)

    def test_batched_matches_unbatched(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(4, 3, 2, 10))
        w = ad.constant(rng.normal(size=(5, 2, 3)))
        b = ad.constant(rng.normal(size=5))
        y = ad.conv1d(ad.constant(x), w, b)
        for i in range(4):
            for j in range(3):
                single = ad.conv1d(ad.constant(x[i, j]), w, b)
                npt.assert_array_equal(y.data[i, j], single.data)

    def test_channel_mismatch(self):
        with pytest.raises(DimensionError):
            ad.conv1d(ad.constant(np.zeros((3, 8))),
                      ad.constant(np.zeros((2, 2, 3))), None)

    def test_even_width_rejected(self):
        with pytest.raises(ConfigurationError):
            ad.conv1d(ad.constant(np.zeros((2, 8))),
                      ad.constant(np.zeros((2, 2, 4))), None)

    def test_linearity_with_zero_bias(self):
        rng = np.random.default_rng(4)
        w = ad.constant(rng.normal(size=(2, 2, 5)))
        x1 = rng.normal(size=(2, 16))
        x2 = rng.normal(size=(2, 16))
        a, b = 1.7, -0.4
        combined = ad.conv1d(ad.constant(a * x1 + b * x2), w, None).data
        separate = (a * ad.conv1d(ad.constant(x1), w, None).data
                    + b * ad.conv1d(ad.constant(x2), w, None).data)
        npt.assert_allclose(combined, separate, rtol=0, atol=1e-12)

    def test_translation_equivariance_interior(self):
        rng = np.random.default_rng(5)
        w = ad.constant(rng.normal(size=(2, 1, 5)))
        b = ad.constant(rng.normal(size=2))
        x = rng.normal(size=(1, 40))
        shift = 3
        y = ad.conv1d(ad.constant(x), w, b).data
        y_shift = ad.conv1d(ad.constant(np.roll(x, shift, axis=1)), w, b).data
        margin = 2 + shift  # (width-1)/2 plus the shift itself
        npt.assert_allclose(y_shift[:, margin:-margin],
                            np.roll(y, shift, axis=1)[:, margin:-margin],
                            rtol=0, atol=1e-12)


class TestDense:
    def test_identity(self):
        y = ad.dense(ad.constant([0.0, 1.0]), ad.constant(np.eye(2)),
                     ad.constant(np.zeros(2)))
        npt.assert_array_equal(y.data, [0.0, 1.0])

    def test_bias_only(self):
        y = ad.dense(ad.constant([7.0, -3.0]), ad.constant(np.zeros((4, 2))),
                     ad.constant([4.0, 3.0, 2.0, 1.0]))
        npt.assert_array_equal(y.data, [4.0, 3.0, 2.0, 1.0])

    def test_first_column_plus_bias(self):
        rng = np.random.default_rng(6)
        w = rng.normal(size=(4, 2))
        b = rng.normal(size=4)
        y = ad.dense(ad.constant([1.0, 0.0]), ad.constant(w), ad.constant(b))
        npt.assert_allclose(y.data, w[:, 0] + b, rtol=0, atol=0)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ad.dense(ad.constant([1.0, 2.0, 3.0]), ad.constant(np.zeros((4, 2))), None)


class TestMseLoss:
    def test_identical_inputs(self):
        x = np.arange(12, dtype=float).reshape(2, 2, 3)
        assert float(ad.mse_loss(ad.constant(x), x).data) == 0.0

    def test_unit_offset(self):
        x = np.zeros((2, 2, 3))
        assert float(ad.mse_loss(ad.constant(x + 1.0), x).data) == 1.0

    def test_loop_oracle(self):
        rng = np.random.default_rng(7)
        p = rng.normal(size=(2, 2, 3))
        t = rng.normal(size=(2, 2, 3))
        expected = sum((a - b) ** 2 for a, b in zip(p.ravel(), t.ravel())) / p.size
        npt.assert_allclose(float(ad.mse_loss(ad.constant(p), t).data), expected,
                            rtol=1e-15)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ad.mse_loss(ad.constant(np.zeros((2, 3))), np.zeros((3, 2)))

    def test_nonnegative_zero_iff_equal(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            p = rng.normal(size=(3, 4))
            t = rng.normal(size=(3, 4))
            v = float(ad.mse_loss(ad.constant(p), t).data)
            assert v >= 0.0
            assert (v == 0.0) == bool(np.array_equal(p, t))


class TestBackward:
    def test_dense_chain_rule(self):
        # loss = (w*x + b - y)^2 at scalar shapes
        w = ad.parameter([[1.5]], "w")
        b = ad.parameter([0.25], "b")
        x = 0.7
        y = 2.0
        pred = ad.dense(ad.constant([x]), w, b)
        loss = ad.mse_loss(pred, np.array([y]))
        ad.backward(loss)
        resid = 1.5 * x + 0.25 - y
        npt.assert_allclose(w.grad, [[2.0 * resid * x]], rtol=1e-15)
        npt.assert_allclose(b.grad, [2.0 * resid], rtol=1e-15)

    def test_constant_loss_zero_grads(self):
        w = ad.parameter(np.ones((2, 2)), "w")
        loss = ad.mse_loss(ad.constant(np.zeros((2, 2))), np.zeros((2, 2)))
        ad.backward(loss)
        assert w.grad is None  # never touched by the graph

    def test_non_scalar_loss_rejected(self):
        with pytest.raises(UsageError):
            ad.backward(ad.constant(np.zeros(3)))

    def test_shared_node_accumulates(self):
        w = ad.parameter([[2.0]], "w")
        x = ad.constant([1.0])
        y = ad.dense(x, w, None)
        total = ad.add(y, y)
        loss = ad.scaled_sse(total, np.array([0.0]), 1.0)
        ad.backward(loss)
        # total = 2wx, loss = 4w^2 x^2, dloss/dw = 8wx^2 = 16
        npt.assert_allclose(w.grad, [[16.0]], rtol=1e-15)

    def test_conv_dense_pipeline_finite_difference(self):
        rng = np.random.default_rng(9)
        x = ad.constant(rng.normal(size=(2, 8)))
        w = ad.parameter(rng.normal(size=(3, 2, 3)), "w")
        b = ad.parameter(rng.normal(size=3), "b")
        target = rng.normal(size=(3, 8))

        def build():
            return ad.mse_loss(ad.conv1d(x, w, b), target)

        res = finite_difference_check(build, [("w", w), ("b", b)], rng=rng,
                                      samples_per_param=None)
        assert res.max_rel_error < 1e-6, res


class TestAdam:
    def test_first_step_unit_gradient(self):
        p = np.array([1.0])
        state = AdamState()
        adam_step([("p", p)], [("p", np.array([1.0]))], state)
        # bias-corrected m_hat = v_hat = 1 -> update = lr / (1 + eps)
        npt.assert_allclose(p, [1.0 - 0.001 / (1.0 + 1e-8)], rtol=1e-15)
        assert state.step == 1

    def test_zero_gradient_no_move(self):
        p = np.array([3.0, -2.0])
        adam_step([("p", p)], [("p", np.zeros(2))], AdamState())
        npt.assert_array_equal(p, [3.0, -2.0])

    def test_two_step_manual_recursion(self):
        lr, b1, b2, eps = 0.001, 0.9, 0.999, 1e-8
        p = np.array([0.5])
        state = AdamState(learning_rate=lr, beta1=b1, beta2=b2, epsilon=eps)
        adam_step([("p", p)], [("p", np.array([1.0]))], state)
        adam_step([("p", p)], [("p", np.array([1.0]))], state)

        # independent recursion with plain floats
        m = v = 0.0
        q = 0.5
        for t in (1, 2):
            m = b1 * m + (1 - b1) * 1.0
            v = b2 * v + (1 - b2) * 1.0
            q -= lr * (m / (1 - b1 ** t)) / ((v / (1 - b2 ** t)) ** 0.5 + eps)
        npt.assert_allclose(p, [q], rtol=1e-15)

    def test_nonfinite_gradient_names_parameter(self):
        with pytest.raises(NumericError, match="gate_w"):
            adam_step([("gate_w", np.zeros(2))],
                      [("gate_w", np.array([np.nan, 0.0]))], AdamState())


class TestDeterminism:
    def test_identical_seeds_bitwise_equal(self):
        def run():
            rng = np.random.default_rng(42)
            w = ad.parameter(rng.normal(size=(2, 2, 3)), "w")
            b = ad.parameter(rng.normal(size=2), "b")
            state = AdamState()
            outs = []
            for _ in range(5):
                w.zero_grad()
                b.zero_grad()
                x = ad.constant(rng.normal(size=(2, 6)))
                loss = ad.mse_loss(ad.conv1d(x, w, b), np.zeros((2, 6)))
                ad.backward(loss)
                params = [("w", w.data), ("b", b.data)]
                grads = [("w", w.grad), ("b", b.grad)]
                adam_step(params, grads, state)
                outs.append(float(loss.data))
            return outs, w.data.copy(), b.data.copy()

        outs1, w1, b1 = run()
        outs2, w2, b2 = run()
        assert outs1 == outs2
        npt.assert_array_equal(w1, w2)
        npt.assert_array_equal(b1, b2)


class TestNoGrad:
    def test_no_graph_recorded(self):
        w = ad.parameter(np.ones((1, 1, 1)), "w")
        with ad.no_grad():
            y = ad.conv1d(ad.constant(np.ones((1, 4))), w, None)
        assert y._parents == ()
        loss = ad.mse_loss(y, np.zeros((1, 4)))
        ad.backward(loss)
        assert w.grad is None
