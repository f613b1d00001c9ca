"""Novelty signals: predicted volatility, observation surprise, and the
KL divergence between forecasts of the same time point made from a recent
and a stale origin, plus empirical-quantile threshold calibration.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TimeSeries
from .errors import DataError
from .forecaster import (DistVector, Forecast, UPropModel, encode_input,
                         rollout, step, zero_hidden)
from .prob import LN_2PI, kl

SCORE_KINDS = ("volatility", "surprise", "kl")


@dataclass
class NoveltyScore:
    t: int
    kind: str
    value: float
    flagged: bool = False

    def __post_init__(self):
        if self.kind not in SCORE_KINDS:
            raise ValueError(f"unknown score kind {self.kind!r}")
        if self.kind == "kl" and self.value < 0.0:
            raise ValueError("kl novelty scores are nonnegative")


@dataclass
class Threshold:
    cutoff: float
    quantile: float = 0.99

    def __post_init__(self):
        if not 0.5 < self.quantile < 1.0:
            raise ValueError(f"calibration quantile must be in (0.5, 1), got {self.quantile}")


def volatility_score(forecast: Forecast) -> float:
    """Mean predicted scale at the first forecast step."""
    if forecast.horizon < 1:
        raise ValueError("forecast has no steps")
    return float(forecast.steps[0].sigma.mean())


def surprise_score(belief: DistVector, x: np.ndarray,
                   mask: np.ndarray | None = None) -> float:
    """Per-point NLL of the realized values, averaged over observed dims."""
    x = np.asarray(x, dtype=np.float64)
    if mask is None:
        mask = ~np.isnan(x)
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise ValueError("surprise score undefined: all dimensions missing")
    mu, sigma, xv = belief.mu[mask], belief.sigma[mask], x[mask]
    if np.any(sigma == 0.0):
        raise ValueError("surprise score needs strictly positive forecast scales")
    z = (xv - mu) / sigma
    return float(np.mean(0.5 * LN_2PI + np.log(sigma) + 0.5 * z * z))


def forecast_from_origin(model: UPropModel, series: TimeSeries, origin: int,
                         k: int) -> Forecast:
    """k-step forecast from row index ``origin`` (rows 0..origin consumed)."""
    if origin < 0 or origin >= series.steps:
        raise ValueError(f"origin {origin} outside series of length {series.steps}")
    h = zero_hidden(model.stack)
    pending = None
    for t in range(origin + 1):
        inp = encode_input(series.values[t], pending=pending, mask=series.mask[t])
        pending, h = step(model, inp, h)
    preds = [pending]
    for _ in range(k - 1):
        pending, h = step(model, pending, h)
        preds.append(pending)
    return Forecast(origin_t=series.t0 + origin, steps=preds)


def kl_novelty(model: UPropModel, series: TimeSeries, target_t: int,
               near_offset: int = 1, far_offset: int = 8,
               reverse: bool = False) -> float:
    """KL between forecasts of row ``target_t`` from two past origins.

    p is the near-origin (better informed) forecast, q the far-origin one;
    ``reverse`` swaps the direction. Offsets count steps back from the
    target; the origin row itself is consumed before forecasting.
    """
    if near_offset < 1 or far_offset < near_offset:
        raise ValueError("offsets must satisfy far_offset >= near_offset >= 1")
    if target_t - far_offset < 0:
        raise ValueError(
            f"insufficient history: target {target_t} needs {far_offset} prior steps"
        )
    near = forecast_from_origin(model, series, target_t - near_offset, near_offset)
    far = forecast_from_origin(model, series, target_t - far_offset, far_offset)
    p, q = near.steps[-1], far.steps[-1]
    return kl(q, p) if reverse else kl(p, q)


def calibrate_threshold(scores, quantile: float = 0.99) -> Threshold:
    """Empirical quantile (linear interpolation) of >= 100 validation scores."""
    values = np.asarray([s.value if isinstance(s, NoveltyScore) else s for s in scores],
                        dtype=np.float64)
    if values.size < 100:
        raise DataError(f"calibration needs >= 100 scores, got {values.size}")
    return Threshold(cutoff=float(np.quantile(values, quantile, method="linear")),
                     quantile=quantile)


def score_series(model: UPropModel, series: TimeSeries, kind: str,
                 near_offset: int = 1, far_offset: int = 8,
                 threshold: Threshold | None = None) -> list:
    """Score every eligible step of a series with one novelty signal."""
    if kind not in SCORE_KINDS:
        raise ValueError(f"unknown score kind {kind!r}")
    scores = []
    if kind == "kl":
        # one filter pass; snapshots of (pending forecast, hidden state)
        # after each row let every origin be resumed without re-filtering
        h = zero_hidden(model.stack)
        pending = None
        states = []
        for t in range(series.steps):
            inp = encode_input(series.values[t], pending=pending, mask=series.mask[t])
            pending, h = step(model, inp, h)
            states.append((pending, h))

        def from_origin(origin, k):
            pred, hh = states[origin]
            for _ in range(k - 1):
                pred, hh = step(model, pred, hh)
            return pred

        for t in range(far_offset, series.steps):
            p = from_origin(t - near_offset, near_offset)
            q = from_origin(t - far_offset, far_offset)
            value = kl(p, q)
            scores.append(NoveltyScore(t=series.t0 + t, kind=kind, value=value))
    else:
        from .forecaster import filter_series
        steps = filter_series(model, series)
        for t in range(1, series.steps):
            pred = steps[t - 1].forecast.steps[0]
            if kind == "volatility":
                value = float(pred.sigma.mean())
            else:
                if not series.mask[t].any():
                    continue
                value = surprise_score(pred, series.values[t], series.mask[t])
            scores.append(NoveltyScore(t=series.t0 + t, kind=kind, value=value))
    if threshold is not None:
        for s in scores:
            s.flagged = s.value > threshold.cutoff
    return scores
