"""Transductive conformal prediction for weighted k-NN regression.

With the candidate label ``y`` of the test example left free, every
nonconformity score is a piecewise-linear function ``|a_i + b_i * y|``.
Each training example therefore contributes a closed set of candidate
labels on which it is at least as strange as the test example. The
p-value of ``y`` is the fraction of those sets containing ``y``, so the
region ``{y : p(y) > delta}`` can be assembled exactly from the sorted
critical points where the sets begin and end.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigurationError
from .knn import floor_median, knn_table, neighbour_weights, pairwise_distances, smallest_k, weighted_mean
from .nonconformity import MeasureConfig, multiplier_from
from .regions import INF, PredictiveRegion

MEDIAN_MODES = ("per_example", "global")


class SetKind(enum.IntEnum):
    EMPTY = 0
    POINT = 1
    INTERVAL = 2
    RAY_LEFT = 3
    RAY_RIGHT = 4
    TWO_RAYS = 5
    LINE = 6


@dataclass(frozen=True)
class LinearScore:
    """``alpha(y) = |a + b*y|`` with ``b >= 0`` (signs flipped on construction)."""

    a: float
    b: float

    def __post_init__(self):
        if self.b < 0:
            object.__setattr__(self, "a", -float(self.a))
            object.__setattr__(self, "b", -float(self.b))

    def __call__(self, y):
        return np.abs(self.a + self.b * np.asarray(y, dtype=float))


@dataclass(frozen=True)
class SetDescriptor:
    """One closed set ``{y : alpha_i(y) >= alpha_new(y)}``.

    ``endpoints`` holds the finite ends: one for POINT and the rays, two
    (ascending) for INTERVAL and TWO_RAYS, none otherwise.
    """

    kind: SetKind
    endpoints: tuple[float, ...] = ()

    def contains(self, y: float) -> bool:
        k, e = self.kind, self.endpoints
        if k is SetKind.EMPTY:
            return False
        if k is SetKind.LINE:
            return True
        if k is SetKind.POINT:
            return y == e[0]
        if k is SetKind.INTERVAL:
            return e[0] <= y <= e[1]
        if k is SetKind.RAY_LEFT:
            return y <= e[0]
        if k is SetKind.RAY_RIGHT:
            return y >= e[0]
        return y <= e[0] or y >= e[1]


def solve_sets(a, b, a_new: float, b_new: float):
    """Classify every set ``{y : |a_i + b_i y| >= |a_new + b_new y|}``.

    Scores must be sign-normalized (``b >= 0``). Returns ``(kind, lo, hi)``
    arrays; ``lo`` is the left finite end (POINT, INTERVAL, RAY_RIGHT,
    TWO_RAYS) and ``hi`` the right one (INTERVAL, RAY_LEFT, TWO_RAYS).
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    n = a.shape[0]
    kind = np.full(n, SetKind.EMPTY, dtype=np.int8)
    lo = np.full(n, np.nan)
    hi = np.full(n, np.nan)

    lt = b < b_new
    gt = b > b_new
    eq = ~(lt | gt)
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = -(a - a_new) / (b - b_new)
        r2 = -(a + a_new) / (b + b_new)
        mid = -(a + a_new) / (2.0 * b)
    rmin = np.minimum(r1, r2)
    rmax = np.maximum(r1, r2)
    same = rmin == rmax

    # squared difference factors as (a-a_new + (b-b_new)y)(a+a_new + (b+b_new)y):
    # a downward parabola gives the closed interval between the roots,
    # an upward one the two closed rays outside them
    kind[lt] = np.where(same[lt], SetKind.POINT, SetKind.INTERVAL)
    kind[gt] = np.where(same[gt], SetKind.LINE, SetKind.TWO_RAYS)
    lo[lt | gt] = rmin[lt | gt]
    hi[lt | gt] = rmax[lt | gt]
    hi[gt & same] = np.nan
    lo[gt & same] = np.nan

    if b_new != 0:
        right = eq & (a > a_new)
        left = eq & (a < a_new)
        kind[right] = SetKind.RAY_RIGHT
        lo[right] = mid[right]
        kind[left] = SetKind.RAY_LEFT
        hi[left] = mid[left]
        kind[eq & (a == a_new)] = SetKind.LINE
    else:
        kind[eq] = np.where(np.abs(a[eq]) >= abs(a_new), SetKind.LINE, SetKind.EMPTY)
    return kind, lo, hi


def critical_points(a, b, a_new: float, b_new: float) -> np.ndarray:
    """Unsorted points where some score can cross the test example's score."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    diff = b != b_new
    pts = [-(a[diff] - a_new) / (b[diff] - b_new), -(a[diff] + a_new) / (b[diff] + b_new)]
    if b_new != 0:
        single = (b == b_new) & (a != a_new)
        pts.append(-(a[single] + a_new) / (2.0 * b[single]))
    return np.concatenate(pts)


def solve_set(s_i: LinearScore, s_new: LinearScore) -> SetDescriptor:
    kind, lo, hi = solve_sets([s_i.a], [s_i.b], s_new.a, s_new.b)
    k = SetKind(int(kind[0]))
    if k in (SetKind.POINT, SetKind.RAY_RIGHT):
        return SetDescriptor(k, (float(lo[0]),))
    if k is SetKind.RAY_LEFT:
        return SetDescriptor(k, (float(hi[0]),))
    if k in (SetKind.INTERVAL, SetKind.TWO_RAYS):
        return SetDescriptor(k, (float(lo[0]), float(hi[0])))
    return SetDescriptor(k)


def _range_counts(starts, stops, size: int) -> np.ndarray:
    """Add one over every inclusive index range ``[start, stop]``; empty ranges are skipped."""
    keep = starts <= stops
    diff = np.bincount(starts[keep], minlength=size + 1) - np.bincount(stops[keep] + 1, minlength=size + 1)
    return np.cumsum(diff[:size])


@dataclass(frozen=True, eq=False)
class RegionCounts:
    """Sorted critical points with interval counts ``N`` and point counts ``M``.

    ``N[j]`` counts sets containing the open gap between point ``j-1`` and
    point ``j`` (1-based, with infinite sentinels at 0 and ``u+1``);
    ``M[j]`` counts sets containing point ``j``. ``M[0]`` is unused.
    """

    points: np.ndarray
    N: np.ndarray
    M: np.ndarray
    n_examples: int

    def region(self, delta: float) -> PredictiveRegion:
        _check_delta(delta)
        n = self.n_examples
        gap_on = self.N / n > delta
        pt_on = self.M[1:] / n > delta
        ext = np.concatenate(([-INF], self.points, [INF]))
        edges = np.diff(np.concatenate(([0], gap_on.astype(np.int8), [0])))
        run_start = np.flatnonzero(edges == 1)
        run_stop = np.flatnonzero(edges == -1)
        intervals = tuple(zip(ext[run_start].tolist(), ext[run_stop].tolist()))
        lonely = pt_on & ~gap_on[:-1] & ~gap_on[1:]
        return PredictiveRegion(intervals, tuple(self.points[lonely].tolist()))


def region_counts(a, b) -> RegionCounts:
    """Run the counting pass over sign-normalized scores; the last score is the test example's."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    a_new, b_new = float(a[-1]), float(b[-1])
    kind, lo, hi = solve_sets(a, b, a_new, b_new)
    P = np.unique(critical_points(a, b, a_new, b_new))
    u = P.shape[0]
    j_lo = np.searchsorted(P, np.nan_to_num(lo)) + 1
    j_hi = np.searchsorted(P, np.nan_to_num(hi)) + 1
    one = np.ones_like(j_lo)
    top = np.full_like(j_lo, u)
    zero = np.zeros_like(j_lo)

    m_starts, m_stops, n_starts, n_stops = [], [], [], []

    def add(mask, ms, me, ns=None, ne=None):
        m_starts.append(ms[mask])
        m_stops.append(me[mask])
        if ns is not None:
            n_starts.append(ns[mask])
            n_stops.append(ne[mask])

    add(kind == SetKind.POINT, j_lo, j_lo)
    add(kind == SetKind.INTERVAL, j_lo, j_hi, j_lo, j_hi - 1)
    add(kind == SetKind.RAY_LEFT, one, j_hi, zero, j_hi - 1)
    add(kind == SetKind.RAY_RIGHT, j_lo, top, j_lo, top)
    two = kind == SetKind.TWO_RAYS
    add(two, one, j_lo, zero, j_lo - 1)
    add(two, j_hi, top, j_hi, top)
    add(kind == SetKind.LINE, one, top, zero, top)

    M = _range_counts(np.concatenate(m_starts), np.concatenate(m_stops), u + 1)
    N = _range_counts(np.concatenate(n_starts), np.concatenate(n_stops), u + 1)
    return RegionCounts(P, N, M, a.shape[0])


def p_values_from_scores(a, b, y) -> np.ndarray:
    """Fraction of scores with ``alpha_i(y) >= alpha_new(y)``, vectorised over ``y``."""
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[:, None]
    y = np.atleast_1d(np.asarray(y, dtype=float))[None, :]
    alpha = np.abs(a + b * y)
    return np.sum(alpha >= alpha[-1], axis=0) / a.shape[0]


def leave_one_out_medians(values) -> np.ndarray:
    """``out[i]`` is the median of ``values`` with element ``i`` removed."""
    v = np.asarray(values, dtype=float)
    n = v.shape[0]
    order = np.argsort(v, kind="stable")
    s = v[order]
    rank = np.empty(n, dtype=np.intp)
    rank[order] = np.arange(n)

    def kth_remaining(p):
        # p-th order statistic (0-based) once the element at ``rank`` is gone
        return s[np.where(p < rank, p, p + 1)]

    m = n - 1
    if m % 2:
        return kth_remaining(np.full(n, m // 2))
    return 0.5 * (kth_remaining(np.full(n, m // 2 - 1)) + kth_remaining(np.full(n, m // 2)))


def _check_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise ConfigurationError(f"significance level must lie in (0, 1), got {delta}")


class TransductiveRegressor:
    """k-NN transductive conformal predictor over a fixed training set.

    Leave-one-out neighbourhoods of the training rows are computed once;
    each test example then costs O(l log l).

    Parameters
    ----------
    train : Dataset
    config : MeasureConfig
        Must be one of the TCP-compatible kinds (standard, dist_add, dist_exp).
    median_mode : {"per_example", "global"}
        ``per_example`` normalizes each distance sum by the median over the
        other examples of the extended set; ``global`` uses one median over
        all of them (faster, not exact).
    """

    def __init__(self, train: Dataset, config: MeasureConfig, median_mode: str = "per_example"):
        if not config.tcp_compatible:
            raise ConfigurationError(
                f"measure {config.kind.value} depends on neighbour labels and cannot be used "
                "transductively; use standard, dist_add or dist_exp"
            )
        if median_mode not in MEDIAN_MODES:
            raise ConfigurationError(f"median_mode must be one of {MEDIAN_MODES}")
        k = config.k
        if len(train) < k + 1:
            raise ConfigurationError(f"TCP needs at least k+1={k + 1} training rows, got {len(train)}")
        self.train = train
        self.config = config
        self.median_mode = median_mode
        self._idx, self._dist = knn_table(train.attributes, train, k, exclude_self=True)
        w = neighbour_weights(self._dist, config.weighting)
        y = train.labels
        self._loo_residual = y - weighted_mean(w, y[self._idx])
        self._loo_dsum = self._dist.sum(axis=1)
        self._kth = self._dist[:, -1]
        # first k-1 neighbours survive when the test example enters a neighbourhood
        self._head_labels = y[self._idx[:, : k - 1]]
        self._head_dist = self._dist[:, : k - 1]

    def linear_scores(self, x_new) -> tuple[np.ndarray, np.ndarray]:
        """Sign-normalized ``(a, b)`` arrays; the last entry is the test example."""
        cfg = self.config
        k = cfg.k
        X, y = self.train.attributes, self.train.labels
        x_new = np.asarray(x_new, dtype=float)
        dn = pairwise_distances(x_new, X)[0]
        near = smallest_k(dn[None, :], k)[0]
        w_new = neighbour_weights(dn[near], cfg.weighting)
        pred_new = float(weighted_mean(w_new, y[near]))

        # the test example sorts after every training row, so it only
        # displaces the k-th neighbour on a strictly smaller distance
        enter = np.flatnonzero(dn < self._kth)
        a = self._loo_residual.copy()
        b = np.zeros(len(y))
        if enter.size:
            nd = np.concatenate((self._head_dist[enter], dn[enter, None]), axis=1)
            w = neighbour_weights(nd, cfg.weighting)
            a[enter] = y[enter] - np.sum(w[:, :-1] * self._head_labels[enter], axis=1)
            b[enter] = -w[:, -1]
        a = np.append(a, -pred_new)
        b = np.append(b, 1.0)

        if cfg.kind.uses_distance:
            d = self._loo_dsum.copy()
            if enter.size:
                d[enter] = self._head_dist[enter].sum(axis=1) + dn[enter]
            d = np.append(d, dn[near].sum())
            if self.median_mode == "per_example":
                med = leave_one_out_medians(d)
                med = np.where(med > 0, med, floor_median(0.0))
            else:
                med = floor_median(float(np.median(d)))
            factor = multiplier_from(cfg, d / med, np.zeros_like(d))
            a = a / factor
            b = b / factor

        flip = b < 0
        a[flip] = -a[flip]
        b[flip] = -b[flip]
        return a, b

    def region_counts(self, x_new) -> RegionCounts:
        return region_counts(*self.linear_scores(x_new))

    def predict_region(self, x_new, delta: float) -> PredictiveRegion:
        _check_delta(delta)
        return self.region_counts(x_new).region(delta)

    def p_value(self, x_new, y_candidate):
        """p-value of one candidate label, or an array of them."""
        pv = p_values_from_scores(*self.linear_scores(x_new), y_candidate)
        return float(pv[0]) if np.ndim(y_candidate) == 0 else pv


def build_linear_scores(train: Dataset, x_new, config: MeasureConfig) -> list[LinearScore]:
    a, b = TransductiveRegressor(train, config).linear_scores(x_new)
    return [LinearScore(float(ai), float(bi)) for ai, bi in zip(a, b)]


def predict_region(train: Dataset, x_new, config: MeasureConfig, delta: float) -> PredictiveRegion:
    _check_delta(delta)
    return TransductiveRegressor(train, config).predict_region(x_new, delta)


def p_value(train: Dataset, x_new, y_candidate: float, config: MeasureConfig) -> float:
    return float(TransductiveRegressor(train, config).p_value(x_new, float(y_candidate)))
