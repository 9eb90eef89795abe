import numpy as np
import pytest

from factories import make_mlp
from gradcheck import assert_grad_close, numeric_grad
from src.errors import ConfigError, NumericalError, ShapeError, StateError
from src.numcore import (
    AdamState, MlpModel, Rng, adam_step, as_matrix, check_finite, frozen, mlp_backward, mlp_forward, rng_gaussian,
    rng_uniform, scheduled_lr,
)
from src.numcore.losses import bce_with_logits, logsumexp, mse_loss, sigmoid, softmax
from src.numcore.mlp import param_count


def test_param_count_and_layout():
    model = MlpModel([3, 4, 2], "tanh")
    assert model.params.size == param_count([3, 4, 2]) == 3 * 4 + 4 + 4 * 2 + 2
    (W1, b1), (W2, b2) = model.layers()
    W1[...] = 1.0
    assert np.all(model.params[:12] == 1.0)
    assert np.all(model.params[12:16] == 0.0)


def test_forward_matches_straight_line_recomputation():
    model = make_mlp([6, 256, 2], seed=3)
    x = Rng(0).gaussian(5, 6)
    (W1, b1), (W2, b2) = model.layers()
    expected = np.tanh(x @ W1 + b1) @ W2 + b2
    np.testing.assert_allclose(model.forward(x), expected, rtol=0, atol=1e-12)
    np.testing.assert_array_equal(model.predict(x), model.forward(x))


def test_backward_matches_finite_differences():
    model = make_mlp([3, 5, 4, 2], seed=1)
    x = Rng(2).gaussian(6, 3)
    target = Rng(3).gaussian(6, 2)

    def loss():
        return mse_loss(model.predict(x), target)[0]

    _, d_out = mse_loss(mlp_forward(model, x), target)
    d_x = mlp_backward(model, d_out)
    assert_grad_close(model.grads, numeric_grad(loss, model.params))
    assert_grad_close(d_x, numeric_grad(loss, x))


def test_zero_weights_output_the_last_bias():
    model = MlpModel([3, 4, 2], "relu")
    (_, b1), (_, b2) = model.layers()
    b1[...] = 0.7
    b2[...] = [0.5, -1.0]
    out = model.forward(Rng(0).gaussian(5, 3))
    np.testing.assert_array_equal(out, np.tile([0.5, -1.0], (5, 1)))


def test_identity_layer_passes_input_through():
    model = MlpModel([3, 3])
    (W, _), = model.layers()
    W[...] = np.eye(3)
    x = Rng(1).gaussian(4, 3)
    np.testing.assert_array_equal(model.forward(x), x)


def test_zero_upstream_gradient_leaves_grads_at_zero():
    model = make_mlp([3, 5, 2], seed=2)
    model.forward(Rng(3).gaussian(4, 3))
    d_x = model.backward(np.zeros((4, 2)))
    assert np.all(model.grads == 0.0)
    assert np.all(d_x == 0.0)


def test_mean_output_loss_gives_column_mean_weight_gradient():
    model = make_mlp([3, 2], seed=4)
    x = Rng(5).gaussian(8, 3)
    model.forward(x)
    # loss = mean over all 8 x 2 outputs
    model.backward(np.full((8, 2), 1.0 / 16))
    (dW, db), = model.layers(model.grads)
    expected = x.mean(axis=0) / 2
    np.testing.assert_allclose(dW, np.column_stack([expected, expected]), atol=1e-12)
    np.testing.assert_allclose(db, [0.5, 0.5])


def test_backward_requires_forward():
    model = make_mlp([2, 3, 1])
    with pytest.raises(StateError):
        model.backward(np.ones((1, 1)))
    model.forward(np.ones((1, 2)))
    model.backward(np.ones((1, 1)))
    with pytest.raises(StateError):
        model.backward(np.ones((1, 1)))


def test_frozen_model_returns_input_grad_but_keeps_grads_zero():
    model = make_mlp([2, 3, 1])
    x = np.ones((4, 2))
    with frozen(model):
        model.forward(x)
        d_x = model.backward(np.ones((4, 1)))
    assert np.all(model.grads == 0.0)
    assert d_x.shape == (4, 2)
    assert model.trainable


def test_shape_errors():
    model = make_mlp([3, 4, 2])
    with pytest.raises(ShapeError):
        model.forward(np.ones((2, 5)))
    with pytest.raises(ShapeError):
        MlpModel([3], "relu")
    with pytest.raises(ShapeError):
        as_matrix(np.ones((2, 2, 2)))
    with pytest.raises(ConfigError):
        MlpModel([2, 2, 1], "swish")


def test_adam_first_step_moves_by_lr():
    model = make_mlp([2, 1])
    before = model.params.copy()
    model.grads[...] = np.linspace(-1.0, 1.0, model.grads.size) + 0.5
    state = AdamState.for_model(model, lr=0.01)
    adam_step(model, state)
    # bias-corrected first step is lr * sign(g) up to eps
    np.testing.assert_allclose(before - model.params, 0.01 * np.sign(np.linspace(-1, 1, 3) + 0.5), atol=1e-7)
    assert np.all(model.grads == 0.0)


def test_adam_with_zero_gradients_only_counts_the_step():
    model = make_mlp([3, 2])
    before = model.params.copy()
    state = AdamState.for_model(model, lr=0.1)
    adam_step(model, state)
    np.testing.assert_array_equal(model.params, before)
    assert state.step_count == 1


def test_adam_descends_a_quadratic():
    model = MlpModel([1, 1], params=[1.0, 0.0])
    state = AdamState.for_model(model, lr=0.01)
    path = [abs(model.params[0])]
    for _ in range(10):
        model.grads[0] = 2.0 * model.params[0]
        adam_step(model, state)
        path.append(abs(model.params[0]))
    assert np.all(np.diff(path) < 0)


def test_adam_rejects_mismatched_buffers():
    model = make_mlp([2, 1])
    with pytest.raises(ShapeError):
        adam_step(model, AdamState(model.params.size + 1, 0.01))


def test_lr_schedules():
    assert scheduled_lr("none", 0.1, 50, 100, 0.5, 10) == 0.1
    assert scheduled_lr("linear", 0.1, 50, 100, 0.5, 10) == pytest.approx(0.05)
    assert scheduled_lr("step", 5e-4, 250, 8000, 0.99, 100) == pytest.approx(5e-4 * 0.99 ** 2)
    with pytest.raises(ConfigError):
        scheduled_lr("cosine", 0.1, 0, 1, 1.0, 1)


def test_rng_streams_are_deterministic_and_independent():
    a, b = Rng(5), Rng(5)
    np.testing.assert_array_equal(a.gaussian(3, 4), b.gaussian(3, 4))
    np.testing.assert_array_equal(Rng(5).spawn("x").random(8), Rng(5).spawn("x").random(8))
    assert not np.array_equal(Rng(5).spawn("x").random(8), Rng(5).spawn("y").random(8))
    assert not np.array_equal(Rng(5).random(8), Rng(6).random(8))
    np.testing.assert_array_equal(rng_gaussian(Rng(5), 3, 4), Rng(5).gaussian(3, 4))
    np.testing.assert_array_equal(rng_uniform(Rng(5), -1.0, 1.0, 3, 4), Rng(5).uniform(-1.0, 1.0, 3, 4))


def test_rng_uniform_respects_bounds():
    draws = Rng(0).uniform(-1.0, 1.0, 2000, 2)
    assert draws.min() >= -1.0 and draws.max() < 1.0
    per_col = Rng(0).uniform(np.array([0.0, 10.0]), np.array([1.0, 11.0]), 500, 2)
    assert per_col[:, 1].min() >= 10.0


def test_rng_gaussian_moments():
    z = Rng(11).gaussian(20000, 1)
    assert abs(z.mean()) < 0.03
    assert abs(z.std() - 1.0) < 0.03


def test_rng_choice_follows_probabilities():
    picks = Rng(3).choice(np.array([0.0, 1.0, 0.0]), 50)
    assert np.all(picks == 1)


def test_bce_with_logits_matches_probability_space_oracle():
    logits = Rng(4).gaussian(200, 1) * 3.0
    targets = (Rng(5).random((200, 1)) > 0.5).astype(np.float64)
    p = 1.0 / (1.0 + np.exp(-logits))
    oracle = np.mean(-(targets * np.log(p) + (1 - targets) * np.log(1 - p)))
    value, grad = bce_with_logits(logits, targets)
    assert abs(value - oracle) <= 1e-9
    np.testing.assert_allclose(grad, (p - targets) / logits.size, atol=1e-12)


def test_sigmoid_is_stable_for_large_logits():
    out = sigmoid(np.array([-1000.0, 0.0, 1000.0]))
    np.testing.assert_allclose(out, [0.0, 0.5, 1.0])


def test_softmax_and_logsumexp():
    x = np.array([[1000.0, 1000.0], [0.0, np.log(3.0)]])
    np.testing.assert_allclose(softmax(x, axis=1), [[0.5, 0.5], [0.25, 0.75]])
    np.testing.assert_allclose(logsumexp(x, axis=1), [1000.0 + np.log(2.0), np.log(4.0)])


def test_check_finite():
    assert check_finite(1.0) == 1.0
    with pytest.raises(NumericalError):
        check_finite(np.array([1.0, np.nan]))
