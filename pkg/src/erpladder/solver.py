"""Candidate generation and exact selection of the encoding ladder.

The program picks, for every bandwidth profile, exactly its quota of in-band
candidates (each candidate at most once) minimizing the summed
``gamma * cost + (1 - gamma) * distortion``. It is subject to storage and
compute budgets and a minimum bitrate ratio ``tau`` between any two picks.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .cost import rep_cost
from .domain import (
    TOL,
    BandwidthProfile,
    CandidateRep,
    Config,
    GridSpec,
    Ladder,
    LadderEntry,
    ModelKind,
    Resolution,
    SolverConfig,
    validate_config,
)
from .rdmodel import rep_distortion

DEFAULT_GRID_RATIO = 1.02
ORACLE_LIMIT = 10**7


class InfeasibleError(Exception):
    """No assignment satisfies the constraints; ``constraint`` names the culprit."""

    def __init__(self, constraint: str, message: str):
        super().__init__(message)
        self.constraint = constraint


class OracleTooLarge(ValueError):
    pass


@dataclass(frozen=True)
class Violation:
    constraint: str
    indices: Tuple[int, ...]
    detail: str

    def __str__(self) -> str:
        return f"{self.constraint}: {self.detail}"


# --- candidates ---------------------------------------------------------------

def grid_points(spec: GridSpec, profile: BandwidthProfile) -> List[float]:
    """Geometric series ``anchor * ratio**k`` rounded to 0.01 Mbps, kept inside the band."""
    if spec.ratio <= 1.0 or spec.anchor <= 0:
        raise ValueError("grid needs anchor > 0 and ratio > 1")
    pts: List[float] = []
    k = 0
    while True:
        z = round(spec.anchor * spec.ratio**k, 2)
        if z > profile.b_max + TOL:
            break
        if z >= profile.b_min - TOL and (not pts or z != pts[-1]):
            pts.append(z)
        k += 1
        if k > 100000:
            raise ValueError("grid did not reach the band")
    return pts


def profile_grids(cfg: Config) -> Tuple[GridSpec, ...]:
    if cfg.grids:
        return cfg.grids
    return tuple(GridSpec(p.b_min, DEFAULT_GRID_RATIO) for p in cfg.solver.profiles)


def make_candidate(cfg: Config, content_type: int, res: Resolution, z: float) -> CandidateRep:
    s = cfg.solver
    d, _ = rep_distortion(cfg.model(content_type, res.index, ModelKind.DISTORTION), z, s.n_tiles)
    c, size = rep_cost(
        res,
        z,
        cfg.model(content_type, res.index, ModelKind.DATA_SIZE),
        s.n_tiles,
        s.mu_e,
        s.mu_s,
        cfg.cost_thresholds,
    )
    return CandidateRep(res, z, d, size, c)


def candidates_from_bitrates(
    cfg: Config, content_type: int, bitrates: Iterable[float],
    resolutions: Optional[Sequence[Resolution]] = None,
) -> List[CandidateRep]:
    """Cross product of bitrates and resolutions, deduplicated and sorted by (z, g)."""
    res_list = tuple(resolutions) if resolutions is not None else cfg.resolutions
    zs: List[float] = []
    for z in sorted(bitrates):
        if not z > 0:
            raise ValueError("bitrates must be positive")
        if not zs or abs(z - zs[-1]) > TOL:
            zs.append(z)
    if not zs:
        raise ValueError("empty grid")
    return [make_candidate(cfg, content_type, r, z) for z in zs for r in res_list]


def generate_candidates(
    cfg: Config, content_type: int, grids: Optional[Sequence[GridSpec]] = None
) -> List[CandidateRep]:
    grids = tuple(grids) if grids is not None else profile_grids(cfg)
    if len(grids) != len(cfg.solver.profiles):
        raise ValueError("one grid per profile required")
    zs = [z for g, p in zip(grids, cfg.solver.profiles) for z in grid_points(g, p)]
    return candidates_from_bitrates(cfg, content_type, zs)


# --- shared helpers -------------------------------------------------------------

def _weights(candidates: Sequence[CandidateRep], gamma: float, normalize: bool = False) -> List[float]:
    sc = sd = 1.0
    if normalize and candidates:
        sc = math.fsum(c.cost for c in candidates) / len(candidates) or 1.0
        sd = math.fsum(c.distortion for c in candidates) / len(candidates) or 1.0
    return [gamma * c.cost / sc + (1.0 - gamma) * c.distortion / sd for c in candidates]


def _score(assignment: Sequence[Tuple[int, int]], candidates, weights):
    """(objective, tie-break key) for a list of (candidate index, profile index)."""
    obj = math.fsum(weights[i] for i, _ in assignment)
    key = tuple(
        sorted((candidates[i].z, candidates[i].resolution.index, i, p) for i, p in assignment)
    )
    return obj, key


def _build_ladder(assignment, candidates, weights, gamma) -> Ladder:
    obj, key = _score(assignment, candidates, weights)
    entries = tuple(LadderEntry(p, candidates[i]) for _, _, i, p in key)
    return Ladder(entries, obj, gamma)


def _spaced(za: float, zb: float, tau: float) -> bool:
    lo, hi = (za, zb) if za <= zb else (zb, za)
    return hi / lo >= tau - TOL


# --- branch and bound -----------------------------------------------------------

class _Search:
    """Depth-first branch and bound over ladders built in ascending bitrate order.

    With ``tau > 1`` two picks must differ in bitrate by the ratio ``tau``,
    and the ratio composes, so checking consecutive picks suffices. A
    dynamic program over (last pick, remaining per-profile quota) gives the
    exact cost-to-go when budgets are ignored. It serves as the lower bound
    for the objective and, run on sizes and costs, for both budgets.
    """

    def __init__(
        self,
        candidates: Sequence[CandidateRep],
        cfg: SolverConfig,
        spacing: bool = True,
        storage: bool = True,
        compute: bool = True,
    ):
        self.cands = list(candidates)
        self.cfg = cfg
        self.w = _weights(self.cands, cfg.gamma, cfg.normalize)
        self.s_max = cfg.s_max if storage else math.inf
        self.c_max = cfg.c_max if compute else math.inf
        self.spacing = spacing and cfg.tau > 1.0 + TOL

        order = sorted(
            range(len(self.cands)),
            key=lambda i: (self.cands[i].z, self.cands[i].resolution.index, i),
        )
        self.order = order
        n = self.n = len(order)
        zs = [self.cands[i].z for i in order]

        quotas = cfg.quotas()
        self.profiles = [p for p in range(len(cfg.profiles)) if quotas[p] > 0]
        self.quota = [quotas[p] for p in self.profiles]
        self.base = []
        size = 1
        for q in self.quota:
            self.base.append(size)
            size *= q + 1
        self.n_states = size
        self.full = sum(q * b for q, b in zip(self.quota, self.base))

        # Profiles whose band holds sorted position j.
        self.valid = [
            [k for k, p in enumerate(self.profiles) if cfg.profiles[p].contains(z)] for z in zs
        ]
        # First position allowed after j (index n = none).
        if self.spacing:
            nxt = []
            for j, z in enumerate(zs):
                t = j + 1
                while t < n and zs[t] / z < cfg.tau - TOL:
                    t += 1
                nxt.append(t)
        else:
            nxt = list(range(1, n + 1))
        self.nxt = nxt

        states = np.arange(self.n_states)
        self.digit = [(states // b) % (q + 1) for b, q in zip(self.base, self.quota)]
        vals_w = np.array([self.w[i] for i in order], dtype=float).reshape(-1)
        vals_s = np.array([self.cands[i].data_size for i in order], dtype=float).reshape(-1)
        vals_c = np.array([self.cands[i].cost for i in order], dtype=float).reshape(-1)
        self.vw, self.vs, self.vc = vals_w, vals_s, vals_c
        self.gw = self._cost_to_go(vals_w)
        self.gs = self._cost_to_go(vals_s)
        self.gc = self._cost_to_go(vals_c)

    def _cost_to_go(self, vals: np.ndarray) -> np.ndarray:
        # g[j, r]: cheapest way to fill remaining quota r using positions >= j.
        n, S = self.n, self.n_states
        g = np.full((n + 2, S), np.inf)
        g[n, 0] = 0.0
        g[n + 1, 0] = 0.0
        for j in range(n - 1, -1, -1):
            row = g[j + 1].copy()
            after = g[self.nxt[j]]
            for k in self.valid[j]:
                has = self.digit[k] > 0
                idx = np.flatnonzero(has)
                np.minimum.at(row, idx, vals[j] + after[idx - self.base[k]])
            g[j] = row
        return g

    def lower_bound(self) -> float:
        return float(self.gw[0, self.full]) if self.n else (0.0 if self.full == 0 else math.inf)

    def run(self) -> Optional[List[Tuple[int, int]]]:
        self.best_obj = math.inf
        self.best_key = None
        self.best = None
        if self.full == 0:
            self.best = []
            return self.best
        if not math.isfinite(self.lower_bound()):
            return None
        if self.gs[0, self.full] > self.s_max + TOL or self.gc[0, self.full] > self.c_max + TOL:
            return None
        self.assign: List[Tuple[int, int]] = []
        self._dfs(0, self.full, 0.0, 0.0, 0.0)
        return self.best

    def _dfs(self, start: int, r: int, w: float, s: float, c: float):
        gw, gs, gc = self.gw, self.gs, self.gc
        for j in range(start, self.n):
            eps = 1e-9 * max(1.0, abs(self.best_obj)) if self.best is not None else 0.0
            if w + gw[j, r] > self.best_obj + eps:
                break  # gw[., r] is a suffix minimum, so later j cannot do better
            nj = self.nxt[j]
            for k in self.valid[j]:
                if self.digit[k][r] == 0:
                    continue
                r2 = r - self.base[k]
                w2 = w + self.vw[j]
                if w2 + gw[nj, r2] > self.best_obj + eps:
                    continue
                s2 = s + self.vs[j]
                c2 = c + self.vc[j]
                if s2 + gs[nj, r2] > self.s_max + TOL or c2 + gc[nj, r2] > self.c_max + TOL:
                    continue
                self.assign.append((self.order[j], self.profiles[k]))
                if r2 == 0:
                    self._leaf()
                else:
                    self._dfs(nj, r2, w2, s2, c2)
                self.assign.pop()

    def _leaf(self):
        obj, key = _score(self.assign, self.cands, self.w)
        if self.best is None or obj < self.best_obj or (obj == self.best_obj and key < self.best_key):
            self.best_obj, self.best_key = obj, key
            self.best = list(self.assign)


def _diagnose(candidates, cfg: SolverConfig) -> InfeasibleError:
    quotas = cfg.quotas()
    for p, prof in enumerate(cfg.profiles):
        n_in = sum(1 for c in candidates if prof.contains(c.z))
        if n_in < quotas[p]:
            return InfeasibleError(
                "quota",
                f"infeasible: quota for profile p{p + 1} needs {quotas[p]} in-band "
                f"candidates, {n_in} available",
            )
    loose = _Search(candidates, cfg, spacing=False, storage=False, compute=False)
    if not math.isfinite(loose.lower_bound()):
        return InfeasibleError("quota", "infeasible: profile quotas cannot be met with distinct candidates")
    spaced = _Search(candidates, cfg, spacing=True, storage=False, compute=False)
    if not math.isfinite(spaced.lower_bound()):
        return InfeasibleError(
            "spacing", f"infeasible: no ladder meets the quotas with bitrate spacing tau={cfg.tau}"
        )
    if spaced.gs[0, spaced.full] > cfg.s_max + TOL:
        return InfeasibleError("storage", "infeasible: storage budget infeasible")
    if spaced.gc[0, spaced.full] > cfg.c_max + TOL:
        return InfeasibleError("compute", "infeasible: compute budget infeasible")
    return InfeasibleError("compute", "infeasible: storage and compute budgets cannot both be met")


def solve(candidates: Sequence[CandidateRep], cfg: SolverConfig) -> Ladder:
    """Exact optimum; raises InfeasibleError naming the blocking constraint."""
    validate_config(cfg)
    search = _Search(candidates, cfg)
    best = search.run()
    if best is None:
        raise _diagnose(candidates, cfg)
    return _build_ladder(best, search.cands, search.w, cfg.gamma)


# --- exhaustive oracle ----------------------------------------------------------

def solve_bruteforce(candidates: Sequence[CandidateRep], cfg: SolverConfig) -> Ladder:
    """Enumerate every quota-sized disjoint assignment and check all constraints directly."""
    validate_config(cfg)
    cands = list(candidates)
    quotas = cfg.quotas()
    domains = [
        [i for i, c in enumerate(cands) if p.b_min - TOL <= c.z <= p.b_max + TOL]
        for p in cfg.profiles
    ]
    total = 1
    for dom, q in zip(domains, quotas):
        total *= math.comb(len(dom), q)
        if total > ORACLE_LIMIT:
            raise OracleTooLarge("instance too large for oracle")
    weights = _weights(cands, cfg.gamma, cfg.normalize)

    best = None
    for combo in itertools.product(*(itertools.combinations(d, q) for d, q in zip(domains, quotas))):
        assignment = [(i, p) for p, picks in enumerate(combo) for i in picks]
        chosen = [i for i, _ in assignment]
        if len(set(chosen)) != len(chosen):
            continue
        if any(not (cfg.profiles[p].b_min - TOL <= cands[i].z <= cfg.profiles[p].b_max + TOL)
               for i, p in assignment):
            continue
        if math.fsum(cands[i].data_size for i in chosen) > cfg.s_max + TOL:
            continue
        if math.fsum(cands[i].cost for i in chosen) > cfg.c_max + TOL:
            continue
        if any(not _spaced(cands[a].z, cands[b].z, cfg.tau)
               for a, b in itertools.combinations(chosen, 2)):
            continue
        obj, key = _score(assignment, cands, weights)
        if best is None or (obj, key) < (best[0], best[1]):
            best = (obj, key, assignment)
    if best is None:
        raise InfeasibleError("infeasible", "infeasible")
    return _build_ladder(best[2], cands, weights, cfg.gamma)


# --- post-hoc validation ----------------------------------------------------------

def validate_ladder(ladder: Ladder, cfg: SolverConfig) -> List[Violation]:
    out: List[Violation] = []
    entries = ladder.entries
    for n, e in enumerate(entries):
        if not 0 <= e.profile < len(cfg.profiles):
            out.append(Violation("band", (n,), f"entry {n} names unknown profile {e.profile + 1}"))
            continue
        prof = cfg.profiles[e.profile]
        if not prof.contains(e.rep.z):
            out.append(Violation(
                "band", (n,),
                f"entry {n} z={e.rep.z:.2f} outside p{e.profile + 1} [{prof.b_min}, {prof.b_max}]",
            ))
    for p, q in enumerate(cfg.quotas()):
        got = sum(1 for e in entries if e.profile == p)
        if got != q:
            idx = tuple(n for n, e in enumerate(entries) if e.profile == p)
            out.append(Violation("quota", idx, f"profile p{p + 1} has {got} entries, quota {q}"))
    seen: Dict[Tuple[float, int], int] = {}
    for n, e in enumerate(entries):
        k = (round(e.rep.z, 9), e.rep.resolution.index)
        if k in seen:
            out.append(Violation(
                "uniqueness", (seen[k], n), f"entries {seen[k]} and {n} are the same representation"
            ))
        else:
            seen[k] = n
    s_tot = math.fsum(e.rep.data_size for e in entries)
    if s_tot > cfg.s_max + TOL:
        out.append(Violation("storage", tuple(range(len(entries))),
                             f"total size {s_tot:.3f} exceeds {cfg.s_max}"))
    c_tot = math.fsum(e.rep.cost for e in entries)
    if c_tot > cfg.c_max + TOL:
        out.append(Violation("compute", tuple(range(len(entries))),
                             f"total cost {c_tot:.3f} exceeds {cfg.c_max}"))
    for a, b in itertools.combinations(range(len(entries)), 2):
        za, zb = entries[a].rep.z, entries[b].rep.z
        if not _spaced(za, zb, cfg.tau):
            out.append(Violation(
                "spacing", (a, b), f"entries {a} ({za:.2f}) and {b} ({zb:.2f}) closer than tau={cfg.tau}"
            ))
    return out


# --- estimator facade -------------------------------------------------------------

class LadderOptimizer(BaseEstimator):
    """Select a ladder from candidate representations.

    ``fit(candidates)`` solves the program; ``predict(bandwidths)`` returns,
    per client bandwidth (Mbps), the bitrate of the highest rung that fits,
    falling back to the lowest rung.
    """

    def __init__(
        self,
        gamma: float = 0.0,
        m_total: int = 12,
        tau: float = 1.2,
        s_max: float = 8000.0,
        c_max: float = 8000.0,
        mu_e: float = 0.017,
        mu_s: float = 0.023,
        n_tiles: int = 10,
        profiles: Sequence[Tuple[float, float, float]] = (
            (1.0, 4.0, 0.25), (3.0, 20.0, 0.25), (15.0, 30.0, 0.25), (25.0, 40.0, 0.25),
        ),
        normalize: bool = False,
    ):
        self.gamma = gamma
        self.m_total = m_total
        self.tau = tau
        self.s_max = s_max
        self.c_max = c_max
        self.mu_e = mu_e
        self.mu_s = mu_s
        self.n_tiles = n_tiles
        self.profiles = profiles
        self.normalize = normalize

    def solver_config(self) -> SolverConfig:
        return validate_config(SolverConfig(
            gamma=float(self.gamma), m_total=int(self.m_total), tau=float(self.tau),
            s_max=float(self.s_max), c_max=float(self.c_max), mu_e=float(self.mu_e),
            mu_s=float(self.mu_s), n_tiles=int(self.n_tiles),
            profiles=tuple(BandwidthProfile(*map(float, p)) for p in self.profiles),
            normalize=bool(self.normalize),
        ))

    def fit(self, candidates: Sequence[CandidateRep], y=None):
        self.ladder_ = solve(candidates, self.solver_config())
        self.objective_ = self.ladder_.objective
        return self

    def predict(self, bandwidths):
        check_is_fitted(self, "ladder_")
        rungs = np.array(sorted(e.rep.z for e in self.ladder_.entries))
        b = np.asarray(bandwidths, dtype=float).ravel()
        idx = np.searchsorted(rungs, b + TOL, side="right") - 1
        return rungs[np.clip(idx, 0, len(rungs) - 1)]


# --- interchange ------------------------------------------------------------------

def ladder_to_dict(ladder: Ladder) -> dict:
    """Machine-readable ladder; profiles are 1-based, bitrates kept to 0.01 Mbps."""
    return {
        "representations": [
            {
                "profile": e.profile + 1,
                "width": e.rep.resolution.width,
                "height": e.rep.resolution.height,
                "z_mbps": round(e.rep.z, 2),
                "distortion": e.rep.distortion,
                "cost": e.rep.cost,
                "data_size": e.rep.data_size,
            }
            for e in ladder.entries
        ],
        "objective": ladder.objective,
        "gamma": ladder.gamma,
    }


def rungs_from_dict(doc) -> List[Tuple[int, int, float]]:
    """``(width, height, z)`` per representation of a ladder document."""
    try:
        reps = doc["representations"]
        out = [(int(r["width"]), int(r["height"]), float(r["z_mbps"])) for r in reps]
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed ladder document: {exc}") from None
    if not out:
        raise ValueError("ladder has no representations")
    return out
