"""Inductive conformal prediction for weighted k-NN regression.

The training set is split once into a proper training set, which fits the
k-NN regressor, and a calibration set whose nonconformity scores are
sorted and stored. A test example then needs one neighbour query: its
interval is the prediction plus or minus the ``s``-th largest calibration
score scaled by the example's own difficulty multiplier.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigurationError
from .knn import floor_median, knn_table, neighbour_weights, training_medians, weighted_mean
from .nonconformity import MeasureConfig, multiplier_from
from .regions import INF, PredictiveRegion


@dataclass(frozen=True, eq=False)
class CalibrationModel:
    proper_train: Dataset
    sorted_scores: np.ndarray
    config: MeasureConfig
    median_d: float
    median_s: float
    calibration_indices: np.ndarray
    proper_indices: np.ndarray

    @property
    def q(self) -> int:
        return self.sorted_scores.shape[0]

    @property
    def m(self) -> int:
        return len(self.proper_train)

    def multiplier(self, d_sum, spread) -> np.ndarray:
        """Half-width multipliers from raw neighbour distance sums and label SDs."""
        lam = np.asarray(d_sum, dtype=float) / floor_median(self.median_d)
        xi = np.asarray(spread, dtype=float) / floor_median(self.median_s)
        return multiplier_from(self.config, lam, xi)

    def predict(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Point predictions and half-width multipliers for a batch of inputs."""
        pred, d_sum, spread = neighbourhood(self.proper_train, X, self.config.k, self.config.weighting)
        return pred, self.multiplier(d_sum, spread)

    def quantile(self, delta: float) -> float:
        """The calibration score that sets the half-width at ``delta``; inf when ``s = 0``."""
        s = quantile_index(delta, self.q)
        return INF if s == 0 else float(self.sorted_scores[s - 1])


def neighbourhood(pool: Dataset, X, k: int, weighting: str = "inverse"):
    """Weighted k-NN predictions, neighbour distance sums and neighbour label SDs."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    idx, dist = knn_table(X, pool, k)
    w = neighbour_weights(dist, weighting)
    nb_labels = pool.labels[idx]
    return weighted_mean(w, nb_labels), dist.sum(axis=1), nb_labels.std(axis=1)


def calibrate(train: Dataset, q: int, config: MeasureConfig, seed=0) -> CalibrationModel:
    """Split ``train`` into proper training and calibration sets and score the latter.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts. The
    ``q`` calibration rows are the tail of a seeded permutation; both parts
    keep their original row order so neighbour tie-breaking is unaffected.
    """
    return calibrate_measures(train, q, [config], seed)[0]


def calibrate_measures(train: Dataset, q: int, configs, seed=0) -> list[CalibrationModel]:
    """Calibrate several measures on one shared split and one neighbour search.

    All configs must agree on ``k`` and the weighting rule.
    """
    configs = list(configs)
    k, weighting = configs[0].k, configs[0].weighting
    if any(c.k != k or c.weighting != weighting for c in configs):
        raise ConfigurationError("shared calibration needs one k and one weighting")
    l = len(train)
    if not 1 <= q < l:
        raise ConfigurationError(f"calibration size must satisfy 1 <= q < l={l}, got {q}")
    if l - q <= k:
        raise ConfigurationError(f"proper training set of {l - q} rows is too small for k={k}")
    perm = np.random.default_rng(seed).permutation(l)
    proper_idx = np.sort(perm[: l - q])
    cal_idx = np.sort(perm[l - q:])
    proper = train.subset(proper_idx)
    median_d, median_s = training_medians(proper, k)
    pred, d_sum, spread = neighbourhood(proper, train.attributes[cal_idx], k, weighting)
    residual = np.abs(train.labels[cal_idx] - pred)
    models = []
    for cfg in configs:
        model = CalibrationModel(proper, np.empty(0), cfg, median_d, median_s, cal_idx, proper_idx)
        scores = np.sort(residual / model.multiplier(d_sum, spread))[::-1].copy()
        scores.setflags(write=False)
        object.__setattr__(model, "sorted_scores", scores)
        models.append(model)
    return models


def quantile_index(delta: float, q: int) -> int:
    if not 0 < delta < 1:
        raise ConfigurationError(f"significance level must lie in (0, 1), got {delta}")
    return math.floor(delta * (q + 1))


def predict_intervals(model: CalibrationModel, X, delta: float) -> tuple[np.ndarray, np.ndarray]:
    """Batch version of :func:`predict_interval`: arrays of lower and upper ends."""
    pred, mult = model.predict(X)
    alpha = model.quantile(delta)
    if math.isinf(alpha):
        return np.full_like(pred, -INF), np.full_like(pred, INF)
    hw = alpha * mult
    return pred - hw, pred + hw


def predict_interval(model: CalibrationModel, x_new, delta: float) -> PredictiveRegion:
    lo, hi = predict_intervals(model, np.asarray(x_new, dtype=float)[None, :], delta)
    return PredictiveRegion.interval(float(lo[0]), float(hi[0]))


def p_value(model: CalibrationModel, x_new, y_candidate):
    """Share of calibration scores (plus the candidate itself) at least as large as the candidate's."""
    pred, mult = model.predict(np.asarray(x_new, dtype=float)[None, :])
    y = np.asarray(y_candidate, dtype=float)
    cand = np.abs(y - pred[0]) / mult[0]
    # sorted_scores is descending; count entries >= cand
    ascending = model.sorted_scores[::-1]
    count = model.q - np.searchsorted(ascending, cand, side="left")
    pv = (count + 1) / (model.q + 1)
    return float(pv) if pv.ndim == 0 else pv
