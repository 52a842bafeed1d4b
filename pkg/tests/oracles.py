"""Independent reference computations used to cross-check the package.

Nothing here imports the code under test beyond plain data types.
"""

from __future__ import annotations

import math
from typing import List, Sequence, Tuple

import numpy as np

from erpladder.domain import BandwidthProfile, CandidateRep, Resolution, SolverConfig

RESOLUTIONS = (Resolution(3072, 1536, 1), Resolution(4096, 2048, 2), Resolution(8192, 4096, 3))


# --- WS-MSE, pixel by pixel ---------------------------------------------------

def ws_mse_loops(ref: np.ndarray, test: np.ndarray, x0: int, y0: int, w: int, h: int) -> float:
    H = ref.shape[0]
    num = den = 0.0
    for y in range(y0, y0 + h):
        q = math.cos((y + 0.5 - H / 2) * math.pi / H)
        for x in range(x0, x0 + w):
            e = float(int(ref[y, x]) - int(test[y, x]))
            num += q * e * e
            den += q
    return num / den


# --- BD-rate with a hand-rolled monotone cubic ----------------------------------

def _pchip_slopes(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    h = np.diff(x)
    delta = np.diff(y) / h
    n = len(x)
    m = np.zeros(n)
    for k in range(1, n - 1):
        if delta[k - 1] * delta[k] <= 0:
            m[k] = 0.0
        else:
            w1 = 2 * h[k] + h[k - 1]
            w2 = h[k] + 2 * h[k - 1]
            m[k] = (w1 + w2) / (w1 / delta[k - 1] + w2 / delta[k])

    def end(h0, h1, d0, d1):
        s = ((2 * h0 + h1) * d0 - h0 * d1) / (h0 + h1)
        if np.sign(s) != np.sign(d0):
            return 0.0
        if np.sign(d0) != np.sign(d1) and abs(s) > abs(3 * d0):
            return 3 * d0
        return s

    m[0] = end(h[0], h[1], delta[0], delta[1])
    m[-1] = end(h[-1], h[-2], delta[-1], delta[-2])
    return m


def _hermite(x, y, m, t):
    k = min(max(int(np.searchsorted(x, t, side="right")) - 1, 0), len(x) - 2)
    hk = x[k + 1] - x[k]
    s = (t - x[k]) / hk
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    return h00 * y[k] + h10 * hk * m[k] + h01 * y[k + 1] + h11 * hk * m[k + 1]


def _integral(x, y, m, lo, hi) -> float:
    # Composite Simpson per segment: exact for cubics, so this is a true second route.
    knots = sorted({lo, hi, *[v for v in x if lo < v < hi]})
    total = 0.0
    for a, b in zip(knots, knots[1:]):
        ts = np.linspace(a, b, 3)
        fa, fm, fb = (_hermite(x, y, m, t) for t in ts)
        total += (b - a) / 6 * (fa + 4 * fm + fb)
    return total


def bd_rate_oracle(r1: Sequence[float], q1: Sequence[float], r2: Sequence[float], q2) -> float:
    ints = []
    lo = max(min(q1), min(q2))
    hi = min(max(q1), max(q2))
    for r, q in ((r1, q1), (r2, q2)):
        order = np.argsort(q)
        x = np.asarray(q, dtype=float)[order]
        y = np.log10(np.asarray(r, dtype=float))[order]
        ints.append(_integral(x, y, _pchip_slopes(x, y), lo, hi))
    return (10 ** ((ints[1] - ints[0]) / (hi - lo)) - 1) * 100


# --- random ladder instances -------------------------------------------------------

def random_instance(rng: np.random.Generator, ties: bool = False) -> Tuple[List[CandidateRep], SolverConfig]:
    """At most 12 candidates, 3 profiles and quota 2 per profile."""
    n = int(rng.integers(2, 13))
    cands, seen = [], set()
    while len(cands) < n:
        z = round(float(rng.uniform(1.0, 40.0)), 2)
        res = RESOLUTIONS[int(rng.integers(0, 3))]
        if (z, res.index) in seen:
            continue
        seen.add((z, res.index))
        if ties:
            d, c, s = (float(rng.integers(1, 4)) for _ in range(3))
        else:
            d = float(rng.uniform(0, 900))
            c = float(rng.uniform(0.1, 10))
            s = float(rng.uniform(0, 300))
        cands.append(CandidateRep(res, z, d, s, c))
    n_prof = int(rng.integers(1, 4))
    zs = sorted(c.z for c in cands)
    profiles, quotas = [], []
    for _ in range(n_prof):
        # Bands spanning two candidate bitrates, so most instances are feasible.
        i, j = sorted(int(v) for v in rng.integers(0, len(zs), size=2))
        q = int(rng.integers(1, 3))
        profiles.append(BandwidthProfile(zs[i], zs[j], float(q)))
        quotas.append(q)
    tot_s = sum(c.data_size for c in cands)
    tot_c = sum(c.cost for c in cands)
    cfg = SolverConfig(
        gamma=float(rng.choice([0.0, 1.0, rng.uniform()])),
        m_total=sum(quotas),
        tau=float(rng.choice([1.0, rng.uniform(1.0, 1.6)])),
        s_max=float(rng.uniform(0.2, 1.2) * tot_s + 1e-3),
        c_max=float(rng.uniform(0.2, 1.2) * tot_c + 1e-3),
        mu_e=0.017,
        mu_s=0.023,
        n_tiles=10,
        profiles=tuple(profiles),
    )
    return cands, cfg
