"""Forecasting with uncertainty propagation.

The model takes per-dimension (location, scale) pairs as input: observed
values enter with scale 0, missing values with the (mu, sigma) predicted
for them at the previous step. Multi-step forecasts feed each predicted
belief directly into the next step, with no sampling anywhere, so every
inference path is deterministic.

Training runs on complete data only: a window's prefix is fed as observed
context (dropout on), then the model rolls out ``lookahead`` steps
self-fed (dropout off) and is scored by the mean per-point Gaussian NLL
against the ground truth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tn
from .data import NormStats, TimeSeries
from .errors import ConfigError, DataError, ShapeError
from .nn import (AdamState, FusedStack, GruStackParams, LinearParams,
                 adam_init, adam_step, dropout_mask, freeze_linear,
                 freeze_stack, fuse_stack, fused_stack_step, init_gru_stack,
                 init_linear, linear_forward, zero_grad, zero_hidden)
from .prob import LN_2PI, DistVector, SigmaSquash, squash_sigma


@dataclass
class TrainConfig:
    """Training and architecture hyperparameters."""

    lookahead: int = 8
    epochs: int = 20
    learning_rate: float = 0.001
    batch_size: int = 32
    window_length: int = 120
    seed: int = 0
    n_layers: int = 3
    hidden_size: int = 64
    dropout: float = 0.2
    sigma_floor: float = 1e-3

    def __post_init__(self):
        if not 1 <= self.lookahead < self.window_length:
            raise ConfigError(
                f"lookahead must satisfy 1 <= k < window_length, got "
                f"k={self.lookahead}, L={self.window_length}"
            )
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.learning_rate <= 0.0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")


@dataclass
class Forecast:
    """A k-step sequence of belief vectors anchored at ``origin_t``.

    ``steps[j]`` is the belief for time origin_t + 1 + j, in normalized
    units.
    """

    origin_t: int
    steps: list

    @property
    def horizon(self) -> int:
        return len(self.steps)

    def denormalized(self, norm: NormStats) -> "Forecast":
        return Forecast(
            origin_t=self.origin_t,
            steps=[DistVector(mu=s.mu * norm.std + norm.mean, sigma=s.sigma * norm.std)
                   for s in self.steps],
        )


@dataclass
class FilterStep:
    """One online-filtering step: the input used at t, forecast for t+1."""

    t: int
    input: DistVector
    forecast: Forecast


@dataclass
class UPropModel:
    """GRU stack + affine readout mapping 2N belief inputs to 2N raw outputs."""

    dims: int
    stack: GruStackParams
    readout: LinearParams
    squash: SigmaSquash
    norm: NormStats
    train_config: TrainConfig | None = None
    _fstack: FusedStack = field(init=False, repr=False, default=None)
    _freadout: LinearParams = field(init=False, repr=False, default=None)

    def __post_init__(self):
        if self.stack.layers[0].input_size != 2 * self.dims:
            raise ShapeError("stack input width must be 2 * dims")
        if tn.value_of(self.readout.bias).shape[0] != 2 * self.dims:
            raise ShapeError("readout output width must be 2 * dims")
        if self.norm.mean.shape[0] != self.dims:
            raise ShapeError("normalization stats must have exactly dims entries")
        self.refresh_frozen()

    def refresh_frozen(self) -> None:
        """Rebind the numpy inference views to the current parameter arrays."""
        self._fstack = fuse_stack(freeze_stack(self.stack))
        self._freadout = freeze_linear(self.readout)

    def parameters(self) -> list:
        return self.stack.weights() + self.readout.weights()


def build_model(dims: int, config: TrainConfig, norm: NormStats,
                rng: np.random.Generator) -> UPropModel:
    stack = init_gru_stack(2 * dims, config.hidden_size, config.n_layers,
                           config.dropout, rng)
    # the scale half of the input starts with zero weight: an untrained
    # model treats a belief input exactly like an observation, and the
    # scale channels only gain influence through training
    first = stack.layers[0]
    for name in ("W_r", "W_z", "W_n"):
        getattr(first, name).value[:, dims:] = 0.0
    readout = init_linear(config.hidden_size, 2 * dims, rng)
    return UPropModel(dims=dims, stack=stack, readout=readout,
                      squash=SigmaSquash(config.sigma_floor), norm=norm,
                      train_config=config)


def encode_input(obs: np.ndarray, pending: DistVector | None = None,
                 prior: DistVector | None = None,
                 mask: np.ndarray | None = None) -> DistVector:
    """Build the model input for one time step.

    Observed dimensions enter as (value, 0). Missing dimensions take the
    pending one-step forecast for this step, or the prior when there is
    none. Missing entries of ``obs`` are NaN; ``mask`` overrides the NaN
    convention when given.
    """
    obs = np.asarray(obs, dtype=np.float64)
    if mask is None:
        mask = ~np.isnan(obs)
    fallback = pending if pending is not None else prior
    if fallback is None:
        fallback = DistVector.standard(obs.shape[0])
    mu = np.where(mask, obs, fallback.mu)
    sigma = np.where(mask, 0.0, fallback.sigma)
    return DistVector(mu=mu, sigma=sigma)


def step(model: UPropModel, inp: DistVector, h: list):
    """One recurrent step (dropout off): returns (belief for t+1, new hidden)."""
    if inp.dims != model.dims:
        raise ShapeError(f"input dims {inp.dims} != model dims {model.dims}")
    top, h_next = fused_stack_step(model._fstack, inp.flat(), h, masks=None)
    raw = linear_forward(model._freadout, top)
    n = model.dims
    return DistVector(mu=raw[:n], sigma=squash_sigma(raw[n:], model.squash)), h_next


def rollout(model: UPropModel, context: list, k: int,
            origin_t: int | None = None) -> Forecast:
    """Consume ``context`` (DistVectors), then self-feed for ``k`` steps.

    Each prediction's (mu, sigma) is fed directly as the next input — no
    sampling.
    """
    if not context:
        raise ValueError("rollout requires a non-empty context")
    if k < 1:
        raise ValueError(f"horizon must be >= 1, got {k}")
    h = zero_hidden(model.stack)
    for inp in context:
        pred, h = step(model, inp, h)
    preds = [pred]
    for _ in range(k - 1):
        pred, h = step(model, pred, h)
        preds.append(pred)
    return Forecast(origin_t=origin_t if origin_t is not None else len(context) - 1,
                    steps=preds)


def filter_series(model: UPropModel, series: TimeSeries,
                  prior: DistVector | None = None,
                  return_state: bool = False):
    """Online pass over a (normalized) series with missing cells.

    At each step t the input mixes observed values (scale 0) with the
    previous step's forecast for t; the one-step forecast for t+1 is
    recorded. Returns the list of FilterStep records, plus the final
    hidden state and pending forecast when ``return_state`` is set.
    """
    if series.dims != model.dims:
        raise ShapeError(f"series dims {series.dims} != model dims {model.dims}")
    h = zero_hidden(model.stack)
    pending = None
    steps = []
    for t in range(series.steps):
        inp = encode_input(series.values[t], pending=pending, prior=prior,
                           mask=series.mask[t])
        pred, h = step(model, inp, h)
        steps.append(FilterStep(t=series.t0 + t, input=inp,
                                forecast=Forecast(origin_t=series.t0 + t, steps=[pred])))
        pending = pred
    if return_state:
        return steps, h, pending
    return steps


def _window_loss(stack: FusedStack, readout: LinearParams,
                 squash: SigmaSquash, x: np.ndarray, anchor: int, k: int,
                 rng: np.random.Generator):
    """Tape loss of one training window: context then self-fed rollout.

    ``x`` is the normalized (L, N) window; context rows 0..anchor-1 enter
    as observations with dropout on; the k rollout predictions are scored
    against rows anchor..anchor+k-1 by mean per-point NLL.
    """
    dims = x.shape[1]
    zeros = np.zeros(dims)
    n_gaps = len(stack.layers) - 1
    use_dropout = stack.dropout_rate > 0.0 and n_gaps > 0
    h = zero_hidden(stack)
    top = None
    for row in x[:anchor]:
        masks = None
        if use_dropout:
            masks = [dropout_mask(stack.layers[i].hidden_size, stack.dropout_rate, rng)
                     for i in range(n_gaps)]
        top, h = fused_stack_step(stack, np.concatenate([row, zeros]), h, masks)
    loss = None
    for j in range(k):
        raw = linear_forward(readout, top)
        mu = raw[:dims]
        sigma = squash_sigma(raw[dims:], squash)
        target = x[anchor + j]
        z = (target - mu) / sigma
        term = tn.vsum(tn.log(sigma)) + 0.5 * tn.vsum(tn.square(z)) + dims * 0.5 * LN_2PI
        loss = term if loss is None else loss + term
        if j < k - 1:
            top, h = fused_stack_step(stack, tn.concat([mu, sigma]), h, masks=None)
    return loss * (1.0 / (k * dims))


def train(windows: list, config: TrainConfig, norm: NormStats | None = None):
    """Train on complete windows; returns (model, per-epoch mean loss).

    Windows must be fully observed and of length ``config.window_length``.
    Per window per epoch one anchor is drawn uniformly from
    [ceil(L/4), L-k]; identical seeds give identical trajectories.
    """
    if not windows:
        raise DataError("no training windows")
    L, k = config.window_length, config.lookahead
    for w in windows:
        if not w.mask.all():
            raise DataError("training data must not contain missing values")
        if w.steps != L:
            raise DataError(f"training window length {w.steps} != configured {L}")
    dims = windows[0].dims
    if norm is None:
        norm = NormStats.from_windows(windows)
    xs = [(w.values - norm.mean) / norm.std for w in windows]

    rng = np.random.default_rng(config.seed)
    model = build_model(dims, config, norm, rng)
    params = model.parameters()
    adam = adam_init(params, config.learning_rate)

    anchor_lo = math.ceil(L / 4)
    anchor_hi = L - k
    loss_history = []
    for _ in range(config.epochs):
        order = rng.permutation(len(xs))
        epoch_losses = []
        for start in range(0, len(order), config.batch_size):
            batch = order[start:start + config.batch_size]
            fstack = fuse_stack(model.stack)
            losses = []
            for wi in batch:
                anchor = int(rng.integers(anchor_lo, anchor_hi + 1))
                losses.append(_window_loss(fstack, model.readout,
                                           model.squash, xs[wi], anchor, k, rng))
            batch_loss = tn.mean_of(losses)
            zero_grad(params)
            tn.backward(batch_loss)
            adam_step(adam, params)
            epoch_losses.extend(float(l.value) for l in losses)
        loss_history.append(float(np.mean(epoch_losses)))
    model.refresh_frozen()
    return model, loss_history
