"""Conventional baselines: point imputation of missing inputs and
Monte-Carlo multi-step forecasting.

Both baselines reuse the weights of an uncertainty-propagation model;
only the treatment of missing inputs (or of multi-step feedback) differs,
so comparisons isolate the input handling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TimeSeries
from .errors import ShapeError
from .forecaster import (DistVector, FilterStep, Forecast, UPropModel, step,
                         zero_hidden)

# imputed values are presented as certain observations; clamp keeps a
# pathological sample from destabilizing the recurrence
IMPUTE_CLAMP = 8.0


@dataclass
class ImputePolicy:
    """Missing-input treatment: replace by forecast mean or by a sample."""

    kind: str = "mean"
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("mean", "sample"):
            raise ValueError(f"impute policy must be 'mean' or 'sample', got {self.kind!r}")


def filter_series_imputed(model: UPropModel, series: TimeSeries,
                          policy: ImputePolicy,
                          prior: DistVector | None = None) -> list:
    """Like ``filter_series`` but missing inputs become certain values.

    Mean policy feeds (mu_pending, 0); sample policy feeds (s, 0) with
    s ~ N(mu_pending, sigma_pending), seeded. Values are clamped to
    +-IMPUTE_CLAMP normalized units.
    """
    if series.dims != model.dims:
        raise ShapeError(f"series dims {series.dims} != model dims {model.dims}")
    rng = np.random.default_rng(policy.seed)
    if prior is None:
        prior = DistVector.standard(model.dims)
    h = zero_hidden(model.stack)
    pending = None
    steps = []
    for t in range(series.steps):
        mask = series.mask[t]
        fallback = pending if pending is not None else prior
        if mask.all():
            fill = series.values[t]
        elif policy.kind == "mean":
            fill = np.clip(fallback.mu, -IMPUTE_CLAMP, IMPUTE_CLAMP)
        else:
            draw = rng.normal(fallback.mu, fallback.sigma)
            fill = np.clip(draw, -IMPUTE_CLAMP, IMPUTE_CLAMP)
        inp = DistVector(mu=np.where(mask, series.values[t], fill),
                         sigma=np.zeros(model.dims))
        pred, h = step(model, inp, h)
        steps.append(FilterStep(t=series.t0 + t, input=inp,
                                forecast=Forecast(origin_t=series.t0 + t, steps=[pred])))
        pending = pred
    return steps


def mc_rollout(model: UPropModel, context: list, k: int, n_samples: int,
               seed: int):
    """Monte-Carlo multi-step forecast for the conventional model.

    Each trajectory consumes the context, then repeatedly samples from the
    predicted belief and feeds the sample as a certain observation.
    Returns (k, N) arrays of per-step empirical means and stds.
    """
    if n_samples < 2:
        raise ValueError(f"mc_rollout needs n_samples >= 2, got {n_samples}")
    if not context:
        raise ValueError("mc_rollout requires a non-empty context")
    h0 = zero_hidden(model.stack)
    for inp in context:
        pred0, h0 = step(model, inp, h0)
    trajectories = np.empty((n_samples, k, model.dims))
    root = np.random.SeedSequence(seed)
    for s, child in enumerate(root.spawn(n_samples)):
        rng = np.random.default_rng(child)
        pred, h = pred0, list(h0)
        for j in range(k):
            sample = rng.normal(pred.mu, pred.sigma)
            trajectories[s, j] = sample
            if j < k - 1:
                pred, h = step(model, DistVector.observed(sample), h)
    return trajectories.mean(axis=0), trajectories.std(axis=0)
