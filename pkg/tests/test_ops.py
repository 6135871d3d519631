import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from multihot.ops import (
    AdamState,
    adam_update,
    affine,
    affine_backward,
    grad_check,
    layer_widths,
    mse_grad,
    mse_loss,
    pack_arrays,
    sample_standard_gumbel,
    softplus,
    softplus_grad,
    tanh,
    tanh_grad,
    tau_softmax,
    tau_softmax_backward,
    unpack_arrays,
)


class FixedUniform:
    """rng stub returning a constant uniform value."""

    def __init__(self, value):
        self.value = value

    def random(self, shape):
        return np.full(shape, self.value)


def naive_matmul(x, w, b):
    out = np.zeros((x.shape[0], w.shape[1]))
    for i in range(x.shape[0]):
        for j in range(w.shape[1]):
            acc = 0.0
            for k in range(x.shape[1]):
                acc += x[i, k] * w[k, j]
            out[i, j] = acc + b[j]
    return out


class TestAffine:
    def test_identity(self):
        out = affine(np.array([[1.0, 2.0]]), np.eye(2), np.zeros(2))
        assert np.array_equal(out, [[1.0, 2.0]])

    def test_zero_input_gives_bias(self):
        out = affine(np.zeros((1, 2)), np.ones((2, 2)), np.array([3.0, -1.0]))
        assert np.array_equal(out, [[3.0, -1.0]])

    def test_matches_triple_loop_oracle(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=(3, 4))
        w = rng.normal(size=(4, 2))
        b = rng.normal(size=2)
        assert np.allclose(affine(x, w, b), naive_matmul(x, w, b), atol=1e-12)

    def test_shape_error_names_both_shapes(self):
        with pytest.raises(ValueError, match=r"\(2, 3\).*\(4, 2\)"):
            affine(np.zeros((2, 3)), np.zeros((4, 2)), np.zeros(2))
        with pytest.raises(ValueError, match="bias"):
            affine(np.zeros((2, 3)), np.zeros((3, 2)), np.zeros(3))

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(3)
        x = rng.normal(size=(3, 4))
        w = rng.normal(size=(4, 2))
        b = rng.normal(size=2)
        target = rng.normal(size=(3, 2))

        def loss_of(vec):
            xx, ww, bb = unpack_arrays(vec, [x.shape, w.shape, b.shape])
            return mse_loss(affine(xx, ww, bb), target)

        d_out = mse_grad(affine(x, w, b), target)
        dx, dw, db = affine_backward(x, w, d_out)
        point, _ = pack_arrays([x, w, b])
        analytic, _ = pack_arrays([dx, dw, db])
        assert grad_check(loss_of, analytic, point) < 1e-6


class TestActivations:
    def test_tanh_at_zero(self):
        assert tanh(np.zeros((1, 1)))[0, 0] == 0.0

    def test_softplus_at_zero(self):
        assert softplus(np.zeros(1))[0] == pytest.approx(math.log(2.0), abs=1e-12)

    def test_softplus_strictly_positive(self):
        assert np.all(softplus(np.array([-700.0, -30.0, 0.0, 30.0])) > 0)

    def test_gradients_match_finite_differences_at_20_points(self):
        rng = np.random.default_rng(7)
        h = 1e-5
        for _ in range(20):
            x = float(rng.uniform(-4, 4))
            fd_tanh = (math.tanh(x + h) - math.tanh(x - h)) / (2 * h)
            got = tanh_grad(np.tanh(np.array(x)))
            assert abs(got - fd_tanh) / max(abs(fd_tanh), 1e-12) < 1e-6
            sp = lambda v: math.log1p(math.exp(v))
            fd_softplus = (sp(x + h) - sp(x - h)) / (2 * h)
            got = softplus_grad(np.array(x))
            assert abs(got - fd_softplus) / abs(fd_softplus) < 1e-6


class TestGumbel:
    def test_u_half(self):
        g = sample_standard_gumbel((1,), FixedUniform(0.5))
        assert g[0] == pytest.approx(-math.log(math.log(2.0)), abs=1e-12)

    def test_u_exp_minus_one_is_fixed_point(self):
        g = sample_standard_gumbel((1,), FixedUniform(math.exp(-1.0)))
        assert g[0] == pytest.approx(0.0, abs=1e-12)

    def test_monte_carlo_mean_matches_euler_mascheroni(self):
        rng = np.random.default_rng(42)
        draws = sample_standard_gumbel((10**6,), rng)
        assert abs(draws.mean() - np.euler_gamma) < 0.01

    def test_deterministic_given_seed(self):
        a = sample_standard_gumbel((100,), np.random.default_rng(5))
        b = sample_standard_gumbel((100,), np.random.default_rng(5))
        assert np.array_equal(a, b)


class TestTauSoftmax:
    def test_symmetry(self):
        assert np.allclose(tau_softmax(np.array([0.0, 0.0]), 1.0), [0.5, 0.5])

    def test_argmax_limit(self):
        out = tau_softmax(np.array([1.0, 2.0, 0.5]), 0.01)
        assert np.allclose(out, [0.0, 1.0, 0.0], atol=1e-6)

    def test_nonpositive_tau_rejected(self):
        with pytest.raises(ValueError):
            tau_softmax(np.zeros(3), 0.0)

    def test_marginal_probability_of_argmax(self):
        # adding Gumbel noise to log weights makes the argmax follow the
        # normalized categorical, independent of the temperature
        y = np.array([1.0, 3.0])
        rng = np.random.default_rng(123)
        draws = 10**5
        noise = sample_standard_gumbel((draws, 2), rng)
        probs = tau_softmax(np.log(y) + noise, 0.7)
        freq = (probs.argmax(axis=1) == 1).mean()
        assert abs(freq - 0.75) < 0.01

    @settings(max_examples=200, deadline=None)
    @given(
        st.lists(
            st.floats(min_value=-1e6, max_value=1e6, allow_nan=False),
            min_size=1,
            max_size=8,
        ),
        st.floats(min_value=0.01, max_value=10.0),
    )
    def test_always_a_probability_vector(self, logits, tau):
        out = tau_softmax(np.array(logits), tau)
        assert np.all(out >= 0)
        assert abs(out.sum() - 1.0) < 1e-9

    def test_backward_matches_finite_differences(self):
        rng = np.random.default_rng(9)
        logits = rng.normal(size=5)
        target = rng.normal(size=5)
        tau = 0.7

        def loss_of(vec):
            return float(((tau_softmax(vec, tau) - target) ** 2).sum())

        probs = tau_softmax(logits, tau)
        analytic = tau_softmax_backward(probs, 2.0 * (probs - target), tau)
        assert grad_check(loss_of, analytic, logits) < 1e-6


class TestMseLoss:
    def test_equal_inputs(self):
        a = np.ones((3, 2))
        assert mse_loss(a, a) == 0.0

    def test_unit_difference(self):
        assert mse_loss(np.array([[1.0, 0.0]]), np.array([[0.0, 0.0]])) == 1.0

    def test_matches_scalar_loop_oracle(self):
        rng = np.random.default_rng(2)
        a = rng.normal(size=(5, 3))
        b = rng.normal(size=(5, 3))
        acc = 0.0
        for i in range(5):
            for j in range(3):
                acc += (a[i, j] - b[i, j]) ** 2
        assert mse_loss(a, b) == pytest.approx(acc / 5, rel=1e-12)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shapes differ"):
            mse_loss(np.zeros((2, 2)), np.zeros((2, 3)))

    def test_gradient(self):
        rng = np.random.default_rng(4)
        a = rng.normal(size=(4, 3))
        b = rng.normal(size=(4, 3))
        analytic = mse_grad(a, b)
        assert grad_check(lambda v: mse_loss(v.reshape(4, 3), b), analytic.ravel(), a.ravel()) < 1e-7


class TestAdam:
    def test_zero_gradient_keeps_param(self):
        param = np.array([1.0, -2.0])
        adam_update(param, np.zeros(2), AdamState(learning_rate=0.1))
        assert np.array_equal(param, [1.0, -2.0])

    def test_first_step_moves_by_learning_rate(self):
        param = np.zeros(3)
        grad = np.array([0.5, -2.0, 10.0])
        adam_update(param, grad, AdamState(learning_rate=0.01))
        assert np.allclose(param, -0.01 * np.sign(grad), atol=1e-6)

    def test_quadratic_converges(self):
        theta = np.array([1.0])
        state = AdamState(learning_rate=0.1)
        for _ in range(100):
            adam_update(theta, 2.0 * theta, state)
        assert abs(theta[0]) < 0.1
        assert state.step_count == 100

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            adam_update(np.zeros(2), np.zeros(3), AdamState())


class TestGradCheck:
    def test_exact_quadratic(self):
        point = np.array([1.0, -2.0, 3.0])
        assert grad_check(lambda v: float((v**2).sum()), 2.0 * point, point) < 1e-8

    def test_detects_corrupted_gradient(self):
        point = np.array([1.0, -2.0, 3.0])
        assert grad_check(lambda v: float((v**2).sum()), 3.0 * point, point) > 0.1

    def test_rejects_non_finite_objective(self):
        with pytest.raises(ValueError, match="non-finite"):
            grad_check(lambda v: float("nan"), np.zeros(1), np.zeros(1))


class TestPacking:
    def test_roundtrip(self):
        arrays = [np.arange(6.0).reshape(2, 3), np.array([7.0]), np.zeros((2, 2))]
        vec, shapes = pack_arrays(arrays)
        out = unpack_arrays(vec, shapes)
        for a, b in zip(arrays, out):
            assert np.array_equal(a, b)


class TestLayerWidths:
    def test_two_layers_use_hidden(self):
        assert layer_widths(32, 8, 2, hidden=8) == [8, 8]

    def test_single_layer(self):
        assert layer_widths(32, 8, 1) == [8]

    def test_deeper_stacks_interpolate(self):
        widths = layer_widths(64, 8, 3, hidden=8)
        assert widths[-1] == 8
        assert widths[0] > widths[1] > widths[2]
