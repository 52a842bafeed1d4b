"""Encoding-complexity features from probe-encode frame sizes, and content-type classification."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, List, Mapping, Optional, Sequence, TextIO, Union

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .domain import ContentType, EncodingFeatures


class FrameKind(str, enum.Enum):
    I = "I"
    P = "P"
    B = "B"
    OTHER = "Other"


@dataclass(frozen=True)
class FrameRecord:
    frame_kind: FrameKind
    size_bytes: int

    def __post_init__(self):
        if self.size_bytes <= 0:
            raise ValueError("frame size must be positive")


@dataclass(frozen=True)
class Centroid:
    content_type: ContentType
    point: EncodingFeatures


class FrameStatsError(ValueError):
    pass


def parse_frame_stats(stream: Union[TextIO, str]) -> List[FrameRecord]:
    """Read ``<KIND>,<SIZE_BYTES>`` lines; ``#`` comments and blank lines are skipped."""
    lines = stream.splitlines() if isinstance(stream, str) else stream
    records = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        if len(parts) != 2:
            raise FrameStatsError(f"line {lineno}: expected KIND,SIZE_BYTES")
        kind_txt, size_txt = parts[0].strip().upper(), parts[1].strip()
        if not kind_txt:
            raise FrameStatsError(f"line {lineno}: empty frame kind")
        try:
            size = int(size_txt)
        except ValueError:
            raise FrameStatsError(f"line {lineno}: size {size_txt!r} is not an integer") from None
        if size <= 0:
            raise FrameStatsError(f"line {lineno}: size must be positive")
        kind = FrameKind(kind_txt) if kind_txt in ("I", "P", "B") else FrameKind.OTHER
        records.append(FrameRecord(kind, size))
    return records


def mean_i_frame_size(stats: Iterable[FrameRecord]) -> float:
    sizes = [r.size_bytes for r in stats if r.frame_kind is FrameKind.I]
    if not sizes:
        raise ValueError("no I frames")
    return math.fsum(sizes) / len(sizes)


def extract_features(stats: Sequence[FrameRecord], normalizer: float) -> EncodingFeatures:
    """``f_spa`` = mean I size / normalizer (clamped to [0, 1]); ``f_tmp`` = mean P / mean I."""
    if not normalizer > 0:
        raise ValueError("normalizer must be positive")
    # fsum keeps the means independent of frame order.
    i_sizes = [r.size_bytes for r in stats if r.frame_kind is FrameKind.I]
    p_sizes = [r.size_bytes for r in stats if r.frame_kind is FrameKind.P]
    if not i_sizes:
        raise ValueError("no I frames")
    if not p_sizes:
        raise ValueError("no P frames")
    mean_i = math.fsum(i_sizes) / len(i_sizes)
    mean_p = math.fsum(p_sizes) / len(p_sizes)
    f_spa = min(1.0, max(0.0, mean_i / normalizer))
    return EncodingFeatures(f_spa, mean_p / mean_i)


def default_centroids() -> List[Centroid]:
    from .domain import default_config

    return centroids_from_mapping(default_config().centroids)


def centroids_from_mapping(m: Mapping[int, EncodingFeatures]) -> List[Centroid]:
    return [Centroid(ContentType(o), f) for o, f in sorted(m.items())]


def classify(f: EncodingFeatures, centroids: Sequence[Centroid]) -> ContentType:
    """Nearest centroid in (f_spa, f_tmp); ties go to the lowest content-type index."""
    if not centroids:
        raise ValueError("empty centroid list")
    best = min(
        centroids,
        key=lambda c: (
            math.hypot(f.f_spa - c.point.f_spa, f.f_tmp - c.point.f_tmp),
            c.content_type.index,
        ),
    )
    return best.content_type


class FrameFeatureExtractor(BaseEstimator, TransformerMixin):
    """Turn per-title frame-size logs into an ``(n_titles, 2)`` feature array.

    With ``normalizer=None``, ``fit`` learns it as the largest mean I-frame
    size over the corpus it sees.
    """

    def __init__(self, normalizer: Optional[float] = None):
        self.normalizer = normalizer

    def fit(self, X, y=None):
        if self.normalizer is not None:
            if not self.normalizer > 0:
                raise ValueError("normalizer must be positive")
            self.normalizer_ = float(self.normalizer)
        else:
            if len(X) == 0:
                raise ValueError("cannot learn a normalizer from an empty corpus")
            self.normalizer_ = max(mean_i_frame_size(stats) for stats in X)
        return self

    def transform(self, X):
        check_is_fitted(self, "normalizer_")
        rows = []
        for stats in X:
            f = extract_features(stats, self.normalizer_)
            rows.append((f.f_spa, f.f_tmp))
        return np.array(rows, dtype=float).reshape(-1, 2)


class ContentTypeClassifier(BaseEstimator, ClassifierMixin):
    """Nearest-centroid content-type classifier over (f_spa, f_tmp).

    ``fit(X, y)`` sets one centroid per label as the class mean. ``fit()``
    with no data keeps ``centroids`` (or the built-in training centroids).
    """

    def __init__(self, centroids: Optional[Mapping[int, EncodingFeatures]] = None):
        self.centroids = centroids

    def fit(self, X=None, y=None):
        if X is None:
            if self.centroids is not None:
                self.centroids_ = centroids_from_mapping(self.centroids)
            else:
                self.centroids_ = default_centroids()
        else:
            X = check_array(X)
            if X.shape[1] != 2:
                raise ValueError("expected two feature columns (f_spa, f_tmp)")
            y = np.asarray(y).ravel()
            if y.shape[0] != X.shape[0]:
                raise ValueError("X and y have different lengths")
            self.centroids_ = []
            for label in sorted(set(int(v) for v in y)):
                m = X[y == label].mean(axis=0)
                self.centroids_.append(
                    Centroid(ContentType(label), EncodingFeatures(float(m[0]), float(m[1])))
                )
        self.classes_ = np.array([c.content_type.index for c in self.centroids_])
        self.n_features_in_ = 2
        return self

    def predict(self, X):
        check_is_fitted(self, "centroids_")
        X = check_array(X)
        return np.array(
            [classify(EncodingFeatures(float(a), float(b)), self.centroids_).index for a, b in X]
        )
