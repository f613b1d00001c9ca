import numpy as np
import pytest

from uprop import tensor as tn
from uprop.data import NormStats, TimeSeries
from uprop.errors import ConfigError, DataError, ShapeError
from uprop.forecaster import (DistVector, TrainConfig, _window_loss,
                              build_model, encode_input, filter_series,
                              rollout, step, train)
from uprop.nn import fuse_stack, zero_grad, zero_hidden
from uprop.prob import SigmaSquash


def small_model(dims=2, hidden=6, layers=2, seed=0, floor=1e-3):
    cfg = TrainConfig(lookahead=2, window_length=20, n_layers=layers,
                      hidden_size=hidden, dropout=0.0, sigma_floor=floor, seed=seed)
    norm = NormStats(mean=np.zeros(dims), std=np.ones(dims))
    return build_model(dims, cfg, norm, np.random.default_rng(seed))


def toy_windows(n_windows=16, length=40, dims=2, seed=0):
    """Strong AR(1): one-step predictable, learnable in a few epochs."""
    rng = np.random.default_rng(seed)
    windows = []
    for _ in range(n_windows):
        x = np.zeros((length, dims))
        x[0] = rng.normal(size=dims)
        for t in range(1, length):
            x[t] = 0.95 * x[t - 1] + 0.1 * rng.normal(size=dims)
        windows.append(TimeSeries.complete(x))
    return windows


class TestEncodeInput:
    def test_fully_observed(self):
        x = np.array([1.0, -2.0, 3.0])
        d = encode_input(x)
        np.testing.assert_array_equal(d.mu, x)
        np.testing.assert_array_equal(d.sigma, np.zeros(3))

    def test_missing_dim_takes_pending(self):
        obs = np.array([1.0, np.nan, 3.0])
        pending = DistVector(mu=np.array([9.0, 8.0, 7.0]),
                             sigma=np.array([0.1, 0.2, 0.3]))
        d = encode_input(obs, pending=pending)
        np.testing.assert_array_equal(d.mu, [1.0, 8.0, 3.0])
        np.testing.assert_array_equal(d.sigma, [0.0, 0.2, 0.0])

    def test_all_missing_cold_start_uses_prior(self):
        d = encode_input(np.full(3, np.nan))
        np.testing.assert_array_equal(d.mu, np.zeros(3))
        np.testing.assert_array_equal(d.sigma, np.ones(3))

    def test_explicit_mask_overrides_nan_rule(self):
        obs = np.array([1.0, 2.0])
        d = encode_input(obs, mask=np.array([True, False]),
                         prior=DistVector.standard(2))
        np.testing.assert_array_equal(d.mu, [1.0, 0.0])
        np.testing.assert_array_equal(d.sigma, [0.0, 1.0])


class TestStep:
    def test_deterministic(self):
        model = small_model()
        inp = DistVector.observed(np.array([0.3, -0.7]))
        h = zero_hidden(model.stack)
        p1, h1 = step(model, inp, h)
        p2, h2 = step(model, inp, h)
        np.testing.assert_array_equal(p1.mu, p2.mu)
        np.testing.assert_array_equal(p1.sigma, p2.sigma)
        for a, b in zip(h1, h2):
            np.testing.assert_array_equal(a, b)

    def test_sigma_at_least_floor(self):
        model = small_model(floor=1e-3)
        rng = np.random.default_rng(1)
        h = zero_hidden(model.stack)
        for _ in range(20):
            pred, h = step(model, DistVector.observed(rng.normal(size=2)), h)
            assert np.all(pred.sigma >= 1e-3)

    def test_zero_weight_model_emits_readout_bias(self):
        model = small_model()
        for p in model.parameters():
            p.value[...] = 0.0
        bias = model.readout.bias.value
        bias[...] = np.array([0.5, -0.5, 0.2, -3.0])
        model.refresh_frozen()
        pred, _ = step(model, DistVector.observed(np.array([1.0, 2.0])),
                       zero_hidden(model.stack))
        np.testing.assert_allclose(pred.mu, [0.5, -0.5])
        np.testing.assert_allclose(
            pred.sigma, np.logaddexp(0, [0.2, -3.0]) + model.squash.floor)

    def test_dim_mismatch(self):
        model = small_model(dims=2)
        with pytest.raises(ShapeError):
            step(model, DistVector.observed(np.zeros(3)), zero_hidden(model.stack))


class TestRollout:
    def test_k1_equals_one_step_after_context(self):
        model = small_model(seed=2)
        rng = np.random.default_rng(2)
        context = [DistVector.observed(rng.normal(size=2)) for _ in range(5)]
        fc = rollout(model, context, k=1)
        h = zero_hidden(model.stack)
        for inp in context:
            pred, h = step(model, inp, h)
        np.testing.assert_array_equal(fc.steps[0].mu, pred.mu)
        np.testing.assert_array_equal(fc.steps[0].sigma, pred.sigma)

    def test_prefix_consistency(self):
        model = small_model(seed=3)
        rng = np.random.default_rng(3)
        context = [DistVector.observed(rng.normal(size=2)) for _ in range(4)]
        full = rollout(model, context, k=6)
        for j in (1, 3, 5):
            part = rollout(model, context, k=j)
            for a, b in zip(part.steps, full.steps[:j]):
                np.testing.assert_array_equal(a.mu, b.mu)
                np.testing.assert_array_equal(a.sigma, b.sigma)

    def test_empty_context_rejected(self):
        with pytest.raises(ValueError):
            rollout(small_model(), [], k=1)


class TestFilterSeries:
    def test_fully_observed_inputs_have_zero_sigma(self):
        model = small_model(seed=4)
        series = TimeSeries.complete(np.random.default_rng(4).normal(size=(15, 2)))
        for fs in filter_series(model, series):
            np.testing.assert_array_equal(fs.input.sigma, np.zeros(2))

    def test_missing_dim_input_is_previous_forecast(self):
        model = small_model(seed=5)
        values = np.random.default_rng(5).normal(size=(10, 2))
        mask = np.ones((10, 2), dtype=bool)
        mask[6, 1] = False
        series = TimeSeries(values=values, mask=mask)
        steps = filter_series(model, series)
        prev = steps[5].forecast.steps[0]
        assert steps[6].input.mu[1] == prev.mu[1]
        assert steps[6].input.sigma[1] == prev.sigma[1]
        assert steps[6].input.sigma[0] == 0.0

    def test_all_missing_tail_equals_rollout_exactly(self):
        model = small_model(seed=6)
        rng = np.random.default_rng(6)
        values = rng.normal(size=(20, 2))
        mask = np.ones((20, 2), dtype=bool)
        mask[14:, :] = False
        series = TimeSeries(values=values, mask=mask)
        steps = filter_series(model, series)
        context = [DistVector.observed(v) for v in values[:14]]
        fc = rollout(model, context, k=6)
        # forecast made at step 13 is fc step 1; inputs at 14.. equal fc steps
        for j in range(6):
            got = steps[13 + j].forecast.steps[0]
            np.testing.assert_array_equal(got.mu, fc.steps[j].mu)
            np.testing.assert_array_equal(got.sigma, fc.steps[j].sigma)

    def test_dims_mismatch(self):
        model = small_model(dims=2)
        with pytest.raises(ShapeError):
            filter_series(model, TimeSeries.complete(np.zeros((5, 3))))


class TestTrainConfig:
    def test_lookahead_must_be_below_window(self):
        with pytest.raises(ConfigError):
            TrainConfig(lookahead=120, window_length=120)

    def test_epochs_positive(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=0)


class TestTrain:
    def test_loss_decreases_on_learnable_data(self):
        cfg = TrainConfig(lookahead=2, epochs=8, window_length=40,
                          n_layers=1, hidden_size=8, batch_size=8, seed=7,
                          learning_rate=0.01)
        model, history = train(toy_windows(seed=7), cfg)
        assert len(history) == 8
        assert np.mean(history[-2:]) < 0.8 * history[0]

    def test_same_seed_identical_history(self):
        cfg = TrainConfig(lookahead=2, epochs=2, window_length=40,
                          n_layers=1, hidden_size=6, batch_size=8, seed=8)
        _, h1 = train(toy_windows(seed=8), cfg)
        _, h2 = train(toy_windows(seed=8), cfg)
        assert h1 == h2

    def test_rejects_missing_values(self):
        windows = toy_windows(n_windows=2, seed=9)
        windows[1].mask[3, 0] = False
        cfg = TrainConfig(lookahead=2, epochs=1, window_length=40,
                          n_layers=1, hidden_size=4, seed=9)
        with pytest.raises(DataError):
            train(windows, cfg)

    def test_rejects_wrong_window_length(self):
        cfg = TrainConfig(lookahead=2, epochs=1, window_length=50,
                          n_layers=1, hidden_size=4, seed=9)
        with pytest.raises(DataError):
            train(toy_windows(n_windows=2, length=40, seed=10), cfg)

    def test_prediction_shape_against_truth(self):
        # lookahead 3 over 5 dims: truth block is 3x5, each prediction
        # carries 2*5 numbers on the wire
        model = small_model(dims=5, seed=11)
        rng = np.random.default_rng(11)
        context = [DistVector.observed(rng.normal(size=5)) for _ in range(4)]
        fc = rollout(model, context, k=3)
        truth = rng.normal(size=(3, 5))
        assert truth.shape == (3, 5)
        assert len(fc.steps) == 3
        for s in fc.steps:
            assert s.flat().shape == (10,)


class TestGradientsOfTrainingLoss:
    def test_full_model_gradients_match_finite_differences(self):
        rng = np.random.default_rng(12)
        model = small_model(dims=2, hidden=4, layers=1, seed=12)
        x = rng.normal(size=(5, 2))
        anchor, k = 3, 2
        params = model.parameters()

        def loss_value():
            fstack = fuse_stack(model.stack)
            return float(_window_loss(fstack, model.readout, model.squash,
                                      x, anchor, k, rng=None).value)

        zero_grad(params)
        fstack = fuse_stack(model.stack)
        loss = _window_loss(fstack, model.readout, model.squash, x, anchor, k,
                            rng=None)
        tn.backward(loss)
        eps = 1e-5
        for p in params:
            flat = p.value.ravel()
            grad = p.grad.ravel()
            for i in range(flat.size):
                orig = flat[i]
                flat[i] = orig + eps
                lp = loss_value()
                flat[i] = orig - eps
                lm = loss_value()
                flat[i] = orig
                fd = (lp - lm) / (2 * eps)
                assert abs(fd - grad[i]) <= 1e-4 * max(abs(fd), abs(grad[i]), 1e-6)

    def test_unused_parameters_get_zero_gradient(self):
        # sigma path unused by mu, and vice versa, at the readout bias:
        # gradient of the mu part of the loss w.r.t. untouched weights is 0
        model = small_model(dims=1, hidden=4, layers=1, seed=13)
        x = np.zeros((4, 1))
        params = model.parameters()
        zero_grad(params)
        fstack = fuse_stack(model.stack)
        loss = _window_loss(fstack, model.readout, model.squash, x, 2, 1, rng=None)
        tn.backward(loss)
        for p in params:
            assert p.grad is not None
            assert p.grad.shape == p.value.shape
