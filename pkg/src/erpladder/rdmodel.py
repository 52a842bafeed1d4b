"""Two-term power-series models ``k * z**omega + phi`` and their least-squares fit."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterable, List, Sequence, TextIO, Tuple

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .domain import ModelKind, PowerFitParams


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class RDSample:
    z: float
    y: float

    def __post_init__(self):
        if not self.z > 0:
            raise ValueError(f"bitrate must be positive, got {self.z}")


def eval_model(p: PowerFitParams, z) -> float:
    """Unclamped model value at total bitrate ``z`` (Mbps)."""
    za = np.asarray(z, dtype=float)
    if np.any(~(za > 0)):
        raise ValueError("bitrate must be positive")
    out = p.k * np.power(za, p.omega) + p.phi
    return float(out) if out.ndim == 0 else out


def distortion_at(p: PowerFitParams, z: float) -> float:
    """Model WS-MSE, clamped at zero."""
    return max(0.0, eval_model(p, z))


def rep_distortion(p: PowerFitParams, z: float, n_tiles: int) -> Tuple[float, List[float]]:
    """Representation distortion and its equal split over ``n_tiles`` tiles."""
    if n_tiles < 1:
        raise ValueError("n_tiles must be >= 1")
    d = distortion_at(p, z)
    return d, [d / n_tiles] * n_tiles


# --- fitting ----------------------------------------------------------------

_MAX_ITER = 500
_REL_TOL = 1e-10
_LAMBDA0 = 1e-3
_LAMBDA_MIN, _LAMBDA_MAX = 1e-12, 1e12


def _initial_guess(z: np.ndarray, y: np.ndarray, kind: ModelKind) -> np.ndarray:
    phi0 = float(y.min()) - 1e-6 if kind is ModelKind.DISTORTION else 0.0
    shifted = y - phi0
    keep = shifted > 0
    if keep.sum() >= 2 and np.unique(z[keep]).size >= 2:
        lz, ly = np.log(z[keep]), np.log(shifted[keep])
        A = np.column_stack([lz, np.ones_like(lz)])
        (omega0, logk0), *_ = np.linalg.lstsq(A, ly, rcond=None)
        k0 = math.exp(logk0)
    else:
        omega0, k0 = (-0.5 if kind is ModelKind.DISTORTION else 1.0), 1.0
    return np.array([k0, omega0, phi0], dtype=float)


def _residual(theta: np.ndarray, z: np.ndarray, logz: np.ndarray, y: np.ndarray):
    k, om, phi = theta
    zp = np.exp(om * logz)
    r = k * zp + phi - y
    J = np.column_stack([zp, k * zp * logz, np.ones_like(z)])
    return r, J


def _levenberg_marquardt(theta, z, y):
    logz = np.log(z)
    r, J = _residual(theta, z, logz, y)
    sse = float(r @ r)
    lam = _LAMBDA0
    for _ in range(_MAX_ITER):
        if sse == 0.0:
            break
        g = J.T @ r
        H = J.T @ J
        diag = np.diag(H).copy()
        diag[diag == 0] = 1.0
        accepted = False
        while lam <= _LAMBDA_MAX:
            try:
                step = np.linalg.solve(H + lam * np.diag(diag), -g)
            except np.linalg.LinAlgError:
                lam = min(lam * 10, _LAMBDA_MAX * 10)
                continue
            cand = theta + step
            r_new, J_new = _residual(cand, z, logz, y)
            sse_new = float(r_new @ r_new)
            if not np.all(np.isfinite(r_new)):
                lam *= 10
                continue
            if sse_new < sse:
                accepted = True
                break
            lam *= 10
        if not accepted:
            break
        improvement = (sse - sse_new) / sse
        theta, r, J, sse = cand, r_new, J_new, sse_new
        lam = max(lam * 0.1, _LAMBDA_MIN)
        if improvement < _REL_TOL:
            break
    return theta, sse


def fit_power_series(samples: Sequence[RDSample], kind=ModelKind.DISTORTION) -> PowerFitParams:
    """Least-squares fit of ``k * z**omega + phi`` to the samples.

    Damped Gauss-Newton from a log-linear starting point. An extra start
    from a profile scan over ``omega`` is tried as well, and the lower-SSE
    result is kept.
    """
    kind = ModelKind(kind)
    z = np.array([s.z for s in samples], dtype=float)
    y = np.array([s.y for s in samples], dtype=float)
    if z.size < 4 or np.unique(z).size < 3:
        raise FitError("insufficient samples")
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(y))):
        raise FitError("fit diverged")

    best = None
    for theta0 in (_initial_guess(z, y, kind), _profile_start(z, y)):
        theta, sse = _levenberg_marquardt(theta0, z, y)
        if not (np.all(np.isfinite(theta)) and math.isfinite(sse)):
            continue
        if best is None or sse < best[1]:
            best = (theta, sse)
    if best is None:
        raise FitError("fit diverged")
    k, om, phi = (float(v) for v in best[0])
    return PowerFitParams(k, om, phi, kind)


def _profile_start(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    # For fixed omega, (k, phi) is linear least squares; scan omega on a grid.
    logz = np.log(z)
    best = None
    for om in np.linspace(-2.0, 2.0, 161):
        A = np.column_stack([np.exp(om * logz), np.ones_like(z)])
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        r = A @ coef - y
        sse = float(r @ r)
        if best is None or sse < best[0]:
            best = (sse, coef[0], om, coef[1])
    return np.array(best[1:], dtype=float)


def read_rd_samples(stream: TextIO) -> List[RDSample]:
    """Parse ``z,value`` CSV (header line required)."""
    reader = csv.reader(stream)
    try:
        header = next(reader)
    except StopIteration:
        raise ValueError("empty sample file") from None
    if [h.strip().lower() for h in header] != ["z", "value"]:
        raise ValueError("sample file header must be 'z,value'")
    out = []
    for lineno, row in enumerate(reader, start=2):
        if not row or not "".join(row).strip():
            continue
        if len(row) != 2:
            raise ValueError(f"line {lineno}: expected 2 fields")
        try:
            out.append(RDSample(float(row[0]), float(row[1])))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
    return out


def write_rd_samples(samples: Iterable[RDSample]) -> str:
    buf = io.StringIO()
    buf.write("z,value\n")
    for s in samples:
        buf.write(f"{s.z!r},{s.y!r}\n")
    return buf.getvalue()


class PowerSeriesRegressor(BaseEstimator, RegressorMixin):
    """Estimator wrapper around :func:`fit_power_series`.

    ``X`` is a single column of bitrates in Mbps.
    """

    def __init__(self, kind: str = "distortion"):
        self.kind = kind

    def fit(self, X, y):
        z = _as_bitrates(X)
        y = np.asarray(y, dtype=float).ravel()
        if y.shape[0] != z.shape[0]:
            raise ValueError("X and y have different lengths")
        self.params_ = fit_power_series([RDSample(a, b) for a, b in zip(z, y)], self.kind)
        self.n_features_in_ = 1
        return self

    def predict(self, X):
        check_is_fitted(self, "params_")
        return np.asarray(eval_model(self.params_, _as_bitrates(X)), dtype=float).reshape(-1)


def _as_bitrates(X) -> np.ndarray:
    a = np.asarray(X, dtype=float)
    if a.ndim == 2:
        if a.shape[1] != 1:
            raise ValueError("expected a single bitrate column")
        a = a[:, 0]
    return a.ravel()
