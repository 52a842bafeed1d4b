"""Bjøntegaard-delta rate between two rate-quality curves.

Each curve is interpolated as log10(rate) over quality with a monotone
piecewise cubic (PCHIP) rather than the classic global cubic, which tends to
oscillate on four-point curves.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, TextIO, Tuple

import numpy as np
from scipy.interpolate import PchipInterpolator


class BDRateError(ValueError):
    pass


@dataclass(frozen=True)
class RDCurve:
    rates: Tuple[float, ...]
    qualities: Tuple[float, ...]

    def __post_init__(self):
        r = tuple(float(v) for v in self.rates)
        q = tuple(float(v) for v in self.qualities)
        if len(r) != len(q):
            raise BDRateError("rates and qualities differ in length")
        if len(r) < 4:
            raise BDRateError("a curve needs at least 4 points")
        if not all(np.isfinite(r)) or not all(np.isfinite(q)):
            raise BDRateError("non-finite curve point")
        if r[0] <= 0:
            raise BDRateError("rates must be positive")
        if any(b <= a for a, b in zip(r, r[1:])):
            raise BDRateError("rates must be strictly increasing")
        dq = np.diff(q)
        if not (np.all(dq > 0) or np.all(dq < 0)):
            raise BDRateError("quality must be strictly monotone in rate")
        object.__setattr__(self, "rates", r)
        object.__setattr__(self, "qualities", q)

    @classmethod
    def from_points(cls, points: Iterable[Tuple[float, float]]) -> "RDCurve":
        pts = sorted((float(a), float(b)) for a, b in points)
        return cls(tuple(p[0] for p in pts), tuple(p[1] for p in pts))

    def scaled(self, k: float) -> "RDCurve":
        return RDCurve(tuple(k * r for r in self.rates), self.qualities)

    def _interpolant(self) -> PchipInterpolator:
        q = np.asarray(self.qualities)
        lr = np.log10(np.asarray(self.rates))
        order = np.argsort(q)
        return PchipInterpolator(q[order], lr[order], extrapolate=False)


def bd_rate(reference: RDCurve, test: RDCurve) -> float:
    """Average rate difference of ``test`` against ``reference`` at equal quality, in percent."""
    lo = max(min(reference.qualities), min(test.qualities))
    hi = min(max(reference.qualities), max(test.qualities))
    if not hi > lo:
        raise BDRateError("no quality overlap")
    # PPoly.integrate is the exact antiderivative of each cubic segment.
    int_ref = float(reference._interpolant().integrate(lo, hi))
    int_test = float(test._interpolant().integrate(lo, hi))
    mean_diff = (int_test - int_ref) / (hi - lo)
    return (10.0 ** mean_diff - 1.0) * 100.0


def read_curve(stream: TextIO) -> RDCurve:
    """Parse a ``rate_mbps,quality_db`` CSV (header required)."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise BDRateError("empty curve file") from None
    if [h.strip().lower() for h in header] != ["rate_mbps", "quality_db"]:
        raise BDRateError("curve file header must be 'rate_mbps,quality_db'")
    points = []
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise BDRateError(f"line {lineno}: expected 2 fields")
        try:
            points.append((float(row[0]), float(row[1])))
        except ValueError:
            raise BDRateError(f"line {lineno}: not a number") from None
    return RDCurve.from_points(points)


def format_curve(points: Iterable[Tuple[float, float]]) -> str:
    lines = ["rate_mbps,quality_db"]
    lines += [f"{r:.2f},{q:.6f}" for r, q in points]
    return "\n".join(lines) + "\n"
