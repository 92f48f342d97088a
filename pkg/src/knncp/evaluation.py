"""Region metrics and the repeated cross-validation experiment protocol.

Per-example widths and coverage flags from every run and fold are pooled
before summarizing. Infinite-width regions are counted but left out of
the width statistics.
"""

from __future__ import annotations

import csv
import math
import time
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .data import Dataset, SplitPlan, default_calibration_size, holdout_for_k_selection, kfold_split
from .errors import ConfigurationError
from .icp import calibrate_measures, neighbourhood
from .knn import knn_table, neighbour_weights, weighted_mean
from .nonconformity import ALL_KINDS, MeasureConfig, MeasureKind
from .regions import PredictiveRegion
from .tcp import TransductiveRegressor

METHODS = ("tcp", "icp")
DEFAULT_DELTAS = (0.1, 0.05, 0.01)
REPORT_COLUMNS = (
    "method", "measure", "delta", "median_width", "interdecile_mean_width", "error_pct",
    "p10", "p25", "p50", "p75", "p90", "n_infinite", "n", "wall_time_s",
)


@dataclass(frozen=True)
class RegionRecord:
    region: PredictiveRegion
    true_label: float
    width: float = field(init=False)
    covered: bool = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "width", self.region.width)
        object.__setattr__(self, "covered", self.region.contains(self.true_label))


@dataclass(frozen=True)
class ReportRow:
    method: str
    measure: str
    delta: float
    median_width: float
    interdecile_mean_width: float
    error_pct: float
    p10: float
    p25: float
    p50: float
    p75: float
    p90: float
    n_infinite: int
    wall_time_s: float = 0.0
    n: int = 0


def median(values: Sequence[float]) -> float:
    """Median with the mean of the two middle values for even sizes; nan if empty."""
    v = np.sort(np.asarray(values, dtype=float))
    n = v.shape[0]
    if n == 0:
        return math.nan
    return float(v[n // 2]) if n % 2 else float(0.5 * (v[n // 2 - 1] + v[n // 2]))


def interdecile_mean(values: Sequence[float]) -> float:
    """Mean after dropping the lowest and highest ``floor(n/10)`` values."""
    v = np.sort(np.asarray(values, dtype=float))
    cut = v.shape[0] // 10
    kept = v[cut: v.shape[0] - cut]
    return float(kept.mean()) if kept.size else math.nan


def nearest_rank(values: Sequence[float], p: float) -> float:
    v = np.sort(np.asarray(values, dtype=float))
    if v.shape[0] == 0:
        return math.nan
    rank = max(1, math.ceil(p * v.shape[0]))
    return float(v[rank - 1])


def summarize_arrays(widths, covered, delta: float, method: str = "", measure: str = "",
                     wall_time_s: float = 0.0) -> ReportRow:
    widths = np.asarray(widths, dtype=float)
    covered = np.asarray(covered, dtype=bool)
    if widths.size == 0:
        raise ValueError("cannot summarize an empty record set")
    finite = widths[np.isfinite(widths)]
    n_inf = int(widths.size - finite.size)
    if finite.size == 0:
        stats = [math.inf] * 7
    else:
        stats = [median(finite), interdecile_mean(finite)] + [nearest_rank(finite, p) for p in (0.1, 0.25, 0.5, 0.75, 0.9)]
    return ReportRow(
        method=method, measure=measure, delta=float(delta),
        median_width=stats[0], interdecile_mean_width=stats[1],
        error_pct=100.0 * float(np.count_nonzero(~covered)) / widths.size,
        p10=stats[2], p25=stats[3], p50=stats[4], p75=stats[5], p90=stats[6],
        n_infinite=n_inf, wall_time_s=float(wall_time_s), n=int(widths.size),
    )


def summarize(records: Iterable[RegionRecord], delta: float, method: str = "", measure: str = "") -> ReportRow:
    records = list(records)
    return summarize_arrays([r.width for r in records], [r.covered for r in records], delta, method, measure)


def select_k(train: Dataset, candidate_ks: Sequence[int], seed: int = 0, weighting: str = "inverse") -> int:
    """Pick the k with the smallest validation mean absolute error (smallest k on ties)."""
    candidate_ks = sorted(set(int(k) for k in candidate_ks))
    if not candidate_ks:
        raise ConfigurationError("candidate_ks is empty")
    fit, val = holdout_for_k_selection(np.arange(len(train)), seed)
    if candidate_ks[-1] > len(fit) - 1:
        raise ConfigurationError(f"k={candidate_ks[-1]} too large for a fit set of {len(fit)} rows")
    pool = train.subset(fit)
    idx, dist = knn_table(train.attributes[val], pool, candidate_ks[-1])
    best_k, best_mae = candidate_ks[0], math.inf
    for k in candidate_ks:
        w = neighbour_weights(dist[:, :k], weighting)
        pred = weighted_mean(w, pool.labels[idx[:, :k]])
        mae = float(np.mean(np.abs(train.labels[val] - pred)))
        if mae < best_mae:
            best_k, best_mae = k, mae
    return best_k


@dataclass
class ExperimentReport:
    rows: list[ReportRow]
    per_run: list[tuple[int, ReportRow]] = field(default_factory=list)
    k: int | None = None
    q: int | None = None
    seed: int | None = None

    def row(self, method: str, measure: str | MeasureKind, delta: float) -> ReportRow:
        measure = MeasureKind(measure).value
        for r in self.rows:
            if r.method == method and r.measure == measure and math.isclose(r.delta, delta):
                return r
        raise KeyError((method, measure, delta))

    def to_csv(self, path, include_timing: bool = True) -> None:
        write_report_csv(self.rows, path, include_timing)

    def to_text(self) -> str:
        return format_table(self.rows)


def write_report_csv(rows: Sequence[ReportRow], path, include_timing: bool = True,
                     runs: Sequence[int] | None = None) -> None:
    """Write report rows; ``runs`` adds a leading run-index column."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow((("run",) if runs is not None else ()) + REPORT_COLUMNS)
        for i, r in enumerate(rows):
            d = asdict(r)
            if not include_timing:
                d["wall_time_s"] = 0.0
            cells = [d[c] if isinstance(d[c], (str, int)) else repr(float(d[c])) for c in REPORT_COLUMNS]
            writer.writerow(([runs[i]] if runs is not None else []) + cells)


def read_report_csv(path) -> list[ReportRow]:
    types = {f.name: f.type for f in fields(ReportRow)}
    rows = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for rec in csv.DictReader(fh):
            kw = {}
            for c in REPORT_COLUMNS:
                t = types[c]
                kw[c] = rec[c] if t == "str" else int(rec[c]) if t == "int" else float(rec[c])
            rows.append(ReportRow(**kw))
    return rows


def format_table(rows: Sequence[ReportRow]) -> str:
    """Plain-text table: median width, interdecile mean width and error % per confidence level."""
    deltas = sorted({r.delta for r in rows}, reverse=True)
    conf = [f"{100 * (1 - d):g}%" for d in deltas]
    cell = 9
    head1 = f"{'Method':<6} {'Measure':<10} " + " ".join(
        f"{title:^{cell * len(deltas) + len(deltas) - 1}}"
        for title in ("Median Width", "Interdecile Mean", "% outside region")
    )
    head2 = " " * 18 + " ".join(f"{c:>{cell}}" for _ in range(3) for c in conf)
    lines = [head1, head2, "-" * len(head2)]
    index = {(r.method, r.measure, r.delta): r for r in rows}
    seen = []
    for r in rows:
        if (r.method, r.measure) not in seen:
            seen.append((r.method, r.measure))
    for method, measure in seen:
        vals = []
        for attr, fmt in (("median_width", "{:.3f}"), ("interdecile_mean_width", "{:.3f}"), ("error_pct", "{:.2f}")):
            for d in deltas:
                r = index.get((method, measure, d))
                vals.append(fmt.format(getattr(r, attr)) if r else "-")
        lines.append(f"{method.upper():<6} {measure:<10} " + " ".join(f"{v:>{cell}}" for v in vals))
    return "\n".join(lines) + "\n"


# -- protocol ---------------------------------------------------------------

def _fold_records(dataset, train_idx, test_idx, run, fold, methods, configs, deltas, q, seed, median_mode):
    """Widths, coverage and timings for one (run, fold) unit."""
    out: dict = {}
    times: dict = defaultdict(float)
    train = dataset.subset(train_idx)
    Xt = dataset.attributes[test_idx]
    yt = dataset.labels[test_idx]
    if "tcp" in methods:
        for cfg in configs:
            if not cfg.tcp_compatible:
                continue
            t0 = time.perf_counter()
            model = TransductiveRegressor(train, cfg, median_mode=median_mode)
            widths = np.empty((len(deltas), len(yt)))
            covered = np.empty((len(deltas), len(yt)), dtype=bool)
            for g, (x, y) in enumerate(zip(Xt, yt)):
                counts = model.region_counts(x)
                for di, delta in enumerate(deltas):
                    region = counts.region(delta)
                    widths[di, g] = region.width
                    covered[di, g] = region.contains(float(y))
            times[("tcp", cfg.kind.value)] += time.perf_counter() - t0
            for di, delta in enumerate(deltas):
                out[("tcp", cfg.kind.value, delta)] = (widths[di], covered[di])
    if "icp" in methods:
        # all measures share one calibration split and one neighbour search per fold
        t0 = time.perf_counter()
        cal_seed = np.random.SeedSequence([seed, run, fold, 1])
        models = calibrate_measures(train, q, configs, seed=cal_seed)
        cfg0 = configs[0]
        pred, d_sum, spread = neighbourhood(models[0].proper_train, Xt, cfg0.k, cfg0.weighting)
        shared = time.perf_counter() - t0
        for model in models:
            t0 = time.perf_counter()
            hw_unit = model.multiplier(d_sum, spread)
            for delta in deltas:
                alpha = model.quantile(delta)
                hw = np.full_like(pred, math.inf) if math.isinf(alpha) else alpha * hw_unit
                out[("icp", model.config.kind.value, delta)] = (2 * hw, np.abs(yt - pred) <= hw)
            times[("icp", model.config.kind.value)] += shared + time.perf_counter() - t0
    return out, times


def run_experiment(
    dataset: Dataset,
    methods: Sequence[str] = METHODS,
    kinds: Sequence[MeasureKind | str] | None = None,
    plan: SplitPlan = SplitPlan(),
    deltas: Sequence[float] = DEFAULT_DELTAS,
    k: int | None = None,
    gamma: float = 0.5,
    rho: float = 0.5,
    weighting: str = "inverse",
    candidate_ks: Sequence[int] = range(1, 31),
    threads: int = 1,
    median_mode: str = "per_example",
) -> ExperimentReport:
    """Repeated k-fold evaluation of every requested (method, measure, delta).

    ``kinds=None`` selects every measure; TCP then runs only the ones it
    supports. Explicitly requesting a label-dependent measure for a
    TCP-only experiment is an error. When ``k`` is None it is chosen
    by :func:`select_k` on the first training fold of run 0. A zero
    ``plan.calibration_size`` means the default ``100n - 1`` policy.
    """
    methods = tuple(m.lower() for m in methods)
    for m in methods:
        if m not in METHODS:
            raise ConfigurationError(f"unknown method {m!r}; choose from {METHODS}")
    explicit = kinds is not None
    kinds = [MeasureKind(kd) for kd in (kinds if explicit else ALL_KINDS)]
    if explicit and methods == ("tcp",) and not all(kd.tcp_compatible for kd in kinds):
        bad = [kd.value for kd in kinds if not kd.tcp_compatible]
        raise ConfigurationError(f"TCP cannot use measures {bad}")
    for d in deltas:
        if not 0 < d < 1:
            raise ConfigurationError(f"significance level must lie in (0, 1), got {d}")
    n = len(dataset)
    plan.check(n)
    units = [(run, fold, tr, te) for run in range(plan.runs)
             for fold, (tr, te) in enumerate(kfold_split(dataset, plan, run))]
    if k is None:
        first_train = dataset.subset(units[0][2])
        fit_size = len(first_train) - len(first_train) // 3
        k = select_k(first_train, [c for c in candidate_ks if c <= fit_size - 1],
                     seed=plan.seed, weighting=weighting)
    q = plan.calibration_size or default_calibration_size(min(len(u[2]) for u in units))
    if "icp" in methods:
        SplitPlan(plan.folds, plan.runs, plan.seed, q).check(n)
    configs = [MeasureConfig(kd, k, gamma, rho, weighting) for kd in kinds]

    def work(unit):
        run, fold, tr, te = unit
        return _fold_records(dataset, tr, te, run, fold, methods, configs, deltas, q, plan.seed, median_mode)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, units))
    else:
        results = [work(u) for u in units]

    keys = [(m, c.kind.value, d) for m in methods for c in configs for d in deltas
            if m == "icp" or c.tcp_compatible]
    total_time: dict = defaultdict(float)
    for _, times in results:
        for key, t in times.items():
            total_time[key] += t
    rows, per_run = [], []
    for key in keys:
        method, measure, delta = key
        widths = np.concatenate([res[key][0] for res, _ in results])
        covered = np.concatenate([res[key][1] for res, _ in results])
        rows.append(summarize_arrays(widths, covered, delta, method, measure, total_time[(method, measure)]))
        for run in range(plan.runs):
            sel = [i for i, u in enumerate(units) if u[0] == run]
            w = np.concatenate([results[i][0][key][0] for i in sel])
            c = np.concatenate([results[i][0][key][1] for i in sel])
            per_run.append((run, summarize_arrays(w, c, delta, method, measure)))
    return ExperimentReport(rows, per_run, k=k, q=q if "icp" in methods else None, seed=plan.seed)


def validity_margin(delta: float, n: int) -> float:
    """Three binomial standard errors around an error rate ``delta`` over ``n`` trials."""
    return 3.0 * math.sqrt(delta * (1 - delta) / n)

