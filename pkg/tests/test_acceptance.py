"""Acceptance suite: one test per criterion, each at its stated tolerance.

Every test records its outcome through ``record_criterion`` so the
terminal summary prints a PASS/FAIL line per criterion.
"""

import time

import numpy as np
import pytest

from _oracles import TcpOracle, icp_scores
from conftest import BOSTON_CSV
from knncp import Dataset, MeasureConfig, SplitPlan, calibrate, load_csv, normalize_minmax
from knncp.data import SyntheticSpec, generate_synthetic
from knncp.evaluation import run_experiment
from knncp.icp import neighbourhood, p_value as icp_p_value, predict_interval
from knncp.nonconformity import ALL_KINDS, TCP_KINDS, half_width_multiplier, score
from knncp.knn import AccuracyStats
from knncp.tcp import TransductiveRegressor


def _probes(labels, n=4001):
    lo, hi = labels.min(), labels.max()
    span = hi - lo
    return np.linspace(lo - 0.5 * span, hi + 0.5 * span, n)


def test_tcp_matches_grid_oracle(record_criterion):
    rng = np.random.default_rng(20260101)
    deltas = (0.05, 0.1, 0.2)
    disagreements = checked = 0
    t0 = time.perf_counter()
    for _ in range(100):
        X = rng.uniform(0, 1, (30, 2))
        y = rng.uniform(0, 10, 30)
        x_new = rng.uniform(0, 1, 2)
        probes = _probes(y)
        for kind in TCP_KINDS:
            model = TransductiveRegressor(Dataset(X, y), MeasureConfig(kind, k=3))
            counts = model.region_counts(x_new)
            oracle = TcpOracle(X, y, x_new, 3, kind.value).p_values(probes)
            if counts.points.size:
                gap = np.min(np.abs(probes[:, None] - counts.points[None, :]), axis=1)
                keep = gap > 1e-9
            else:
                keep = np.ones(probes.size, dtype=bool)
            for delta in deltas:
                region = counts.region(delta)
                got = np.array([region.contains(p) for p in probes[keep]])
                disagreements += int(np.sum(got != (oracle[keep] > delta)))
                checked += int(keep.sum())
    elapsed = time.perf_counter() - t0
    ok = disagreements == 0 and elapsed < 60
    record_criterion(1, ok, f"{disagreements} disagreements over {checked} probes, {elapsed:.1f} s")
    assert disagreements == 0
    assert elapsed < 60


def test_icp_boundary_consistency(record_criterion):
    rng = np.random.default_rng(7)
    disagreements = checked = 0
    for inst in range(100):
        l = 60
        X = rng.uniform(0, 1, (l, 3))
        y = rng.uniform(0, 10, l)
        # repeated rows give tied calibration scores
        n_dup = rng.integers(5, 20)
        X[l - n_dup:] = X[:n_dup]
        y[l - n_dup:] = y[:n_dup]
        if inst % 10 == 0:
            y[:] = 3.0  # every score zero
        ds = Dataset(X, y)
        scale = max(float(np.ptp(y)), 1.0)
        eps = 1e-6 * scale
        q = int(rng.integers(10, 30))
        for kind in ALL_KINDS:
            model = calibrate(ds, q, MeasureConfig(kind, k=3), seed=inst)
            P, C = model.proper_indices, model.calibration_indices
            pred_c, mult_c = icp_scores(X[P], y[P], X[C], 3, kind.value)
            cal = np.abs(y[C] - pred_c) / mult_c
            x_new = rng.uniform(0, 1, 3)
            pred, mult = icp_scores(X[P], y[P], x_new, 3, kind.value)

            def oracle_p(cand):
                a = np.abs(cand - pred[0]) / mult[0]
                return (np.sum(cal >= a) + 1) / (q + 1)

            for delta in (0.05, 0.1, 0.2, 0.3):
                region = predict_interval(model, x_new, delta)
                (lo, hi), = region.intervals
                if not np.isfinite(lo):
                    checked += 1
                    disagreements += int(not oracle_p(pred[0] + 1e6 * scale) > delta)
                    continue
                outside = [lo - eps, hi + eps]
                inside = [lo + eps, hi - eps] if hi - lo > 2 * eps else [0.5 * (lo + hi)]
                for c in outside:
                    checked += 1
                    disagreements += int(region.contains(c) or oracle_p(c) > delta)
                    disagreements += int(icp_p_value(model, x_new, c) > delta)
                for c in inside:
                    checked += 1
                    disagreements += int(not region.contains(c) or not oracle_p(c) > delta)
                    disagreements += int(not icp_p_value(model, x_new, c) > delta)
    record_criterion(2, disagreements == 0, f"{disagreements} disagreements over {checked} probes, 7 measures")
    assert disagreements == 0


RANGES = {0.1: (7.0, 13.0), 0.05: (3.0, 7.0), 0.01: (0.3, 2.0)}


@pytest.mark.slow
def test_empirical_validity_synthetic(record_criterion):
    t0 = time.perf_counter()
    errors = {}
    for rep in range(20):
        data = generate_synthetic(SyntheticSpec(2000, 5, seed=rep))
        train, test = data.subset(np.arange(1000)), data.subset(np.arange(1000, 2000))
        for kind in TCP_KINDS:
            model = TransductiveRegressor(train, MeasureConfig(kind, k=4))
            for x, y in zip(test.attributes, test.labels):
                counts = model.region_counts(x)
                for delta in RANGES:
                    errors.setdefault(("tcp", kind.value, delta), []).append(y not in counts.region(delta))
        models = [calibrate(train, 99, MeasureConfig(kind, k=4), seed=rep) for kind in ALL_KINDS]
        pred, d_sum, spread = neighbourhood(models[0].proper_train, test.attributes, 4)
        for model in models:
            mult = model.multiplier(d_sum, spread)
            for delta in RANGES:
                hw = model.quantile(delta) * mult
                miss = np.abs(test.labels - pred) > hw
                errors.setdefault(("icp", model.config.kind.value, delta), []).extend(miss.tolist())
    elapsed = time.perf_counter() - t0
    bad = []
    for (method, kind, delta), miss in errors.items():
        pct = 100.0 * np.mean(miss)
        lo, hi = RANGES[delta]
        if not lo <= pct <= hi:
            bad.append(f"{method}/{kind}@{delta}={pct:.2f}%")
    ok = not bad and elapsed < 600
    detail = f"{len(errors)} cells, {len(bad)} out of range {bad}, {elapsed:.0f} s"
    record_criterion(3, ok, detail)
    assert not bad
    assert elapsed < 600


@pytest.fixture(scope="module")
def boston_runs():
    ds, _ = normalize_minmax(load_csv(BOSTON_CSV, "MEDV"))
    plan = SplitPlan(folds=10, runs=10, seed=0, calibration_size=99)
    out = {}
    for method in ("tcp", "icp"):
        t0 = time.perf_counter()
        out[method] = run_experiment(ds, methods=(method,), plan=plan, k=4, gamma=0.5, rho=0.5, threads=1)
        out[method + "_time"] = time.perf_counter() - t0
    return out


@pytest.mark.slow
def test_boston_reproduction(boston_runs, record_criterion):
    tcp = boston_runs["tcp"].row("tcp", "standard", 0.1).median_width
    icp = boston_runs["icp"].row("icp", "standard", 0.1).median_width
    width_ok = abs(tcp / 12.143 - 1) <= 0.15 and abs(icp / 13.710 - 1) <= 0.15
    err_bad = []
    for method, report in (("tcp", boston_runs["tcp"]), ("icp", boston_runs["icp"])):
        for row in report.rows:
            if abs(row.error_pct - 100 * row.delta) > 2.5:
                err_bad.append(f"{method}/{row.measure}@{row.delta}={row.error_pct:.2f}")
    ok = width_ok and not err_bad
    record_criterion(4, ok, f"TCP {tcp:.3f} vs 12.143, ICP {icp:.3f} vs 13.710, error misses {err_bad}")
    assert width_ok
    assert not err_bad


@pytest.mark.slow
def test_boston_combo_exp_narrower(boston_runs, record_criterion):
    rep = boston_runs["icp"]
    pairs = [
        (rep.row("icp", "combo_exp", d).median_width, rep.row("icp", "standard", d).median_width)
        for d in (0.1, 0.05, 0.01)
    ]
    ok = all(c < s for c, s in pairs)
    record_criterion(5, ok, ", ".join(f"{c:.3f} < {s:.3f}" for c, s in pairs))
    assert ok


@pytest.mark.slow
def test_boston_runtime(boston_runs, record_criterion):
    t_tcp, t_icp = boston_runs["tcp_time"], boston_runs["icp_time"]
    ok = t_tcp < 60 and t_icp < 5
    record_criterion(7, ok, f"TCP {t_tcp:.1f} s, ICP {t_icp:.2f} s")
    assert t_tcp < 60
    assert t_icp < 5


def test_nesting(record_criterion):
    rng = np.random.default_rng(99)
    violations = 0
    for trial in range(1000):
        l = int(rng.integers(10, 40))
        X = rng.uniform(0, 1, (l, 2))
        y = rng.uniform(0, 10, l)
        x_new = rng.uniform(0, 1, 2)
        d1, d2 = np.sort(rng.uniform(0.01, 0.6, 2))
        if trial % 2:
            kind = TCP_KINDS[trial % 3]
            model = TransductiveRegressor(Dataset(X, y), MeasureConfig(kind, k=3))
            counts = model.region_counts(x_new)
            small, big = counts.region(d2), counts.region(d1)
        else:
            kind = ALL_KINDS[trial % 7]
            model = calibrate(Dataset(X, y), max(1, l // 3), MeasureConfig(kind, k=3), seed=trial)
            small, big = predict_interval(model, x_new, d2), predict_interval(model, x_new, d1)
        violations += int(not small.issubset(big))
    record_criterion(6, violations == 0, f"{violations} violations over 1000 pairs")
    assert violations == 0


def test_score_multiplier_identity(record_criterion):
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100_000):
        kind = ALL_KINDS[rng.integers(7)]
        cfg = MeasureConfig(kind, 4, gamma=float(rng.uniform(0.01, 2)), rho=float(rng.uniform(0, 2)))
        lam, xi = rng.exponential(1.0, 2)
        stats = AccuracyStats(lam, lam, xi, xi)
        residual = float(rng.exponential(5.0))
        back = score(cfg, residual, stats) * half_width_multiplier(cfg, stats)
        worst = max(worst, abs(back - residual) / residual)
    ok = worst <= 1e-12
    record_criterion(8, ok, f"max relative error {worst:.2e}")
    assert ok
