"""Nonconformity measures for k-NN regression and their interval multipliers.

Every measure divides the absolute residual by a difficulty factor built
from the distance statistic ``lambda`` and/or the label-spread statistic
``xi``. The same factor scales the calibrated quantile back into an
interval half-width, so ``score * multiplier == residual``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .knn import WEIGHTINGS


class MeasureKind(str, enum.Enum):
    STANDARD = "standard"
    DIST_ADD = "dist_add"
    DIST_EXP = "dist_exp"
    STD_ADD = "std_add"
    STD_EXP = "std_exp"
    COMBO_ADD = "combo_add"
    COMBO_EXP = "combo_exp"

    @property
    def tcp_compatible(self) -> bool:
        # xi depends on neighbour labels, which move with the candidate label
        return self in (MeasureKind.STANDARD, MeasureKind.DIST_ADD, MeasureKind.DIST_EXP)

    @property
    def uses_distance(self) -> bool:
        return self in (MeasureKind.DIST_ADD, MeasureKind.DIST_EXP, MeasureKind.COMBO_ADD, MeasureKind.COMBO_EXP)

    @property
    def uses_spread(self) -> bool:
        return self in (MeasureKind.STD_ADD, MeasureKind.STD_EXP, MeasureKind.COMBO_ADD, MeasureKind.COMBO_EXP)


ALL_KINDS = tuple(MeasureKind)
TCP_KINDS = tuple(k for k in MeasureKind if k.tcp_compatible)


@dataclass(frozen=True)
class MeasureConfig:
    kind: MeasureKind = MeasureKind.STANDARD
    k: int = 4
    gamma: float = 0.5
    rho: float = 0.5
    weighting: str = "inverse"

    def __post_init__(self):
        try:
            object.__setattr__(self, "kind", MeasureKind(self.kind))
        except ValueError:
            names = ", ".join(k.value for k in MeasureKind)
            raise ConfigurationError(f"unknown measure {self.kind!r}; choose from {names}") from None
        if int(self.k) != self.k or self.k < 1:
            raise ConfigurationError(f"k must be a positive integer, got {self.k}")
        if not (self.gamma >= 0 and self.rho >= 0):
            raise ConfigurationError(f"gamma and rho must be >= 0, got {self.gamma}, {self.rho}")
        if self.weighting not in WEIGHTINGS:
            raise ConfigurationError(f"unknown weighting {self.weighting!r}")

    @property
    def tcp_compatible(self) -> bool:
        return self.kind.tcp_compatible


def _factor(config: MeasureConfig, lam, xi):
    kind, g = config.kind, config.gamma
    if kind is MeasureKind.STANDARD:
        return np.ones_like(np.asarray(lam, dtype=float))
    if kind is MeasureKind.DIST_ADD:
        return g + lam
    if kind is MeasureKind.DIST_EXP:
        return np.exp(g * lam)
    if kind is MeasureKind.STD_ADD:
        return g + xi
    if kind is MeasureKind.STD_EXP:
        return np.exp(g * xi)
    if kind is MeasureKind.COMBO_ADD:
        return g + lam + xi
    return np.exp(g * lam) + np.exp(config.rho * xi)


def multiplier_from(config: MeasureConfig, lam, xi):
    """Vectorised :func:`half_width_multiplier` over arrays of statistics."""
    f = _factor(config, np.asarray(lam, dtype=float), np.asarray(xi, dtype=float))
    if np.any(f <= 0):
        raise ConfigurationError(
            f"{config.kind.value} has a zero denominator (gamma={config.gamma} with a zero "
            "difficulty statistic); use gamma > 0"
        )
    return f


def score(config: MeasureConfig, residual, stats) -> float:
    """Nonconformity score of an absolute residual given its accuracy statistics."""
    return float(np.asarray(residual, dtype=float) / half_width_multiplier(config, stats))


def half_width_multiplier(config: MeasureConfig, stats) -> float:
    return float(multiplier_from(config, stats.lambda_k, stats.xi_k))
