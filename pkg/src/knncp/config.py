"""Flat ``key = value`` experiment configuration files.

Lines starting with ``#`` are comments. Lists are comma separated.
Recognised keys::

    dataset     CSV path, or "synthetic" to generate data from synthetic.* keys
    label       label column name or index (default -1, the last column)
    method      tcp, icp or both (comma separated)
    measures    any of standard, dist_add, dist_exp, std_add, std_exp, combo_add, combo_exp
    k           neighbour count, or "auto" to select on a validation split
    gamma, rho  measure sensitivity parameters
    folds, runs cross-validation layout
    q           calibration size, or "auto" for the 100n-1 policy
    deltas      significance levels in (0, 1)
    seed        top-level seed
    out         output directory
    weighting   inverse or uniform
    normalize   true/false: min-max scale attributes first
    synthetic.n, synthetic.d, synthetic.mean, synthetic.std, synthetic.low,
    synthetic.high, synthetic.seed, synthetic.mean_params, synthetic.std_params
                (params as name:value pairs, e.g. "amplitude:2, frequency:0.5")
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from pathlib import Path

from .data import SyntheticSpec
from .errors import ConfigurationError
from .evaluation import METHODS
from .knn import WEIGHTINGS
from .nonconformity import ALL_KINDS, MeasureKind


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _parse_params(value: str) -> dict[str, float]:
    params = {}
    for item in _split(value):
        name, _, num = item.partition(":")
        params[name.strip()] = float(num)
    return params


def _format_params(params) -> str:
    return ", ".join(f"{k}:{v!r}" for k, v in params.items())


def _bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


@dataclass(frozen=True)
class RunConfig:
    dataset: str = ""
    label: str = "-1"
    methods: tuple[str, ...] = METHODS
    measures: tuple[str, ...] = tuple(k.value for k in ALL_KINDS)
    k: int | None = None
    gamma: float = 0.5
    rho: float = 0.5
    folds: int = 10
    runs: int = 10
    q: int | None = None
    deltas: tuple[float, ...] = (0.1, 0.05, 0.01)
    seed: int = 0
    out: str = "report"
    weighting: str = "inverse"
    normalize: bool = True
    synthetic: SyntheticSpec | None = None

    def validate(self) -> "RunConfig":
        if not self.dataset:
            raise ConfigurationError("dataset: missing (CSV path or 'synthetic')")
        if self.dataset == "synthetic" and self.synthetic is None:
            raise ConfigurationError("synthetic.n: dataset is 'synthetic' but no synthetic.* keys are set")
        for m in self.methods:
            if m not in METHODS:
                raise ConfigurationError(f"method: unknown method {m!r}; choose from {', '.join(METHODS)}")
        if not self.methods:
            raise ConfigurationError("method: at least one method is required")
        for name in self.measures:
            try:
                MeasureKind(name)
            except ValueError:
                raise ConfigurationError(
                    f"measures: unknown measure {name!r}; choose from {', '.join(k.value for k in ALL_KINDS)}"
                ) from None
        if self.methods == ("tcp",):
            bad = [m for m in self.measures if not MeasureKind(m).tcp_compatible]
            if bad:
                raise ConfigurationError(
                    f"measures: TCP cannot use {', '.join(bad)}; only standard, dist_add, dist_exp"
                )
        for d in self.deltas:
            if not 0 < d < 1:
                raise ConfigurationError(f"deltas: {d} is not in (0, 1)")
        if self.k is not None and self.k < 1:
            raise ConfigurationError("k: must be >= 1")
        if self.gamma < 0 or self.rho < 0:
            raise ConfigurationError("gamma/rho: must be >= 0")
        if self.folds < 2:
            raise ConfigurationError("folds: must be >= 2")
        if self.runs < 1:
            raise ConfigurationError("runs: must be >= 1")
        if self.q is not None and self.q < 1:
            raise ConfigurationError("q: must be >= 1")
        if self.weighting not in WEIGHTINGS:
            raise ConfigurationError(f"weighting: must be one of {', '.join(WEIGHTINGS)}")
        return self

    def with_overrides(self, **kw) -> "RunConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


_SYN_KEYS = ("n", "d", "mean", "std", "low", "high", "seed", "mean_params", "std_params")


def parse_config(text: str) -> RunConfig:
    values: dict = {}
    syn: dict = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        try:
            if key.startswith("synthetic."):
                sub = key.split(".", 1)[1]
                if sub not in _SYN_KEYS:
                    raise ConfigurationError(f"{key}: unknown key")
                syn[sub] = value
            elif key == "dataset":
                values["dataset"] = value
            elif key == "label":
                values["label"] = value
            elif key == "method":
                values["methods"] = tuple(m.lower() for m in _split(value))
            elif key == "measures":
                values["measures"] = tuple(m.lower() for m in _split(value))
            elif key in ("k", "q"):
                values[key] = None if value.lower() == "auto" else int(value)
            elif key in ("gamma", "rho"):
                values[key] = float(value)
            elif key in ("folds", "runs", "seed"):
                values[key] = int(value)
            elif key == "deltas":
                values["deltas"] = tuple(float(d) for d in _split(value))
            elif key in ("out", "weighting"):
                values[key] = value
            elif key == "normalize":
                values["normalize"] = _bool(value)
            else:
                raise ConfigurationError(f"{key}: unknown key")
        except ValueError as exc:
            if isinstance(exc, ConfigurationError):
                raise
            raise ConfigurationError(f"{key}: invalid value {value!r} ({exc})") from None
    if syn:
        try:
            spec = SyntheticSpec(
                n_examples=int(syn.get("n", 1000)),
                d=int(syn.get("d", 5)),
                mean_fn=syn.get("mean", "sine"),
                std_fn=syn.get("std", "linear_abs"),
                mean_params=_parse_params(syn.get("mean_params", "")),
                std_params=_parse_params(syn.get("std_params", "")),
                input_low=float(syn.get("low", -10.0)),
                input_high=float(syn.get("high", 10.0)),
                seed=int(syn.get("seed", 0)),
            )
        except ValueError as exc:
            raise ConfigurationError(f"synthetic.*: {exc}") from None
        values["synthetic"] = spec
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def serialize_config(cfg: RunConfig) -> str:
    lines = [
        f"dataset = {cfg.dataset}",
        f"label = {cfg.label}",
        f"method = {', '.join(cfg.methods)}",
        f"measures = {', '.join(cfg.measures)}",
        f"k = {'auto' if cfg.k is None else cfg.k}",
        f"gamma = {cfg.gamma!r}",
        f"rho = {cfg.rho!r}",
        f"folds = {cfg.folds}",
        f"runs = {cfg.runs}",
        f"q = {'auto' if cfg.q is None else cfg.q}",
        f"deltas = {', '.join(repr(d) for d in cfg.deltas)}",
        f"seed = {cfg.seed}",
        f"out = {cfg.out}",
        f"weighting = {cfg.weighting}",
        f"normalize = {str(cfg.normalize).lower()}",
    ]
    s = cfg.synthetic
    if s is not None:
        lines += [
            f"synthetic.n = {s.n_examples}",
            f"synthetic.d = {s.d}",
            f"synthetic.mean = {s.mean_fn}",
            f"synthetic.std = {s.std_fn}",
            f"synthetic.mean_params = {_format_params(s.mean_params)}",
            f"synthetic.std_params = {_format_params(s.std_params)}",
            f"synthetic.low = {s.input_low!r}",
            f"synthetic.high = {s.input_high!r}",
            f"synthetic.seed = {s.seed}",
        ]
    return "\n".join(lines) + "\n"
