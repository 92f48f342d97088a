"""Predictive regions: finite unions of closed intervals and isolated points."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

INF = math.inf


def _fmt(v: float) -> str:
    return repr(float(v))


@dataclass(frozen=True)
class PredictiveRegion:
    """Sorted, disjoint closed intervals (ends may be infinite) plus isolated points."""

    intervals: tuple[tuple[float, float], ...] = ()
    isolated_points: tuple[float, ...] = ()

    def __post_init__(self):
        ivs = tuple((float(lo), float(hi)) for lo, hi in self.intervals)
        pts = tuple(sorted(float(p) for p in self.isolated_points))
        for lo, hi in ivs:
            if not lo <= hi:
                raise ValueError(f"interval [{lo}, {hi}] is reversed")
        for (_, hi), (lo, _) in zip(ivs, ivs[1:]):
            if not hi < lo:
                raise ValueError("intervals must be sorted and disjoint")
        for p in pts:
            if any(lo <= p <= hi for lo, hi in ivs):
                raise ValueError(f"isolated point {p} lies inside an interval")
        object.__setattr__(self, "intervals", ivs)
        object.__setattr__(self, "isolated_points", pts)

    @classmethod
    def real_line(cls) -> "PredictiveRegion":
        return cls(((-INF, INF),))

    @classmethod
    def interval(cls, lo: float, hi: float) -> "PredictiveRegion":
        return cls(((lo, hi),))

    def contains(self, y: float) -> bool:
        return any(lo <= y <= hi for lo, hi in self.intervals) or y in self.isolated_points

    def __contains__(self, y) -> bool:
        return self.contains(y)

    @property
    def width(self) -> float:
        """Total length; isolated points contribute nothing."""
        return float(sum(hi - lo for lo, hi in self.intervals))

    @property
    def is_empty(self) -> bool:
        return not self.intervals and not self.isolated_points

    @property
    def is_bounded(self) -> bool:
        return all(math.isfinite(lo) and math.isfinite(hi) for lo, hi in self.intervals)

    def issubset(self, other: "PredictiveRegion") -> bool:
        for lo, hi in self.intervals:
            if not any(olo <= lo and hi <= ohi for olo, ohi in other.intervals):
                return False
        return all(other.contains(p) for p in self.isolated_points)

    def format(self) -> str:
        """``lo,hi`` pieces joined by ``;`` in ascending order; isolated points print alone."""
        if self.is_empty:
            return "empty"
        pieces: list[tuple[float, str]] = [(lo, f"{_fmt(lo)},{_fmt(hi)}") for lo, hi in self.intervals]
        pieces += [(p, _fmt(p)) for p in self.isolated_points]
        return ";".join(text for _, text in sorted(pieces, key=lambda t: t[0]))

    __str__ = format

    @classmethod
    def parse(cls, text: str) -> "PredictiveRegion":
        text = text.strip()
        if text == "empty":
            return cls()
        intervals: list[tuple[float, float]] = []
        points: list[float] = []
        for piece in text.split(";"):
            parts: Sequence[str] = piece.split(",")
            if len(parts) == 2:
                intervals.append((float(parts[0]), float(parts[1])))
            else:
                points.append(float(parts[0]))
        return cls(tuple(intervals), tuple(points))
