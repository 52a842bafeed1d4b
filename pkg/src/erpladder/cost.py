"""Per-representation resource cost: broken-line encoding cost plus linear storage cost."""

from __future__ import annotations

import enum
from typing import Sequence, Tuple

from .domain import DEFAULT_COST_THRESHOLDS, PowerFitParams, Resolution
from .rdmodel import eval_model


class ResolutionClass(enum.IntEnum):
    UP_TO_720P = 1
    UP_TO_1080P = 2
    UP_TO_4K = 4
    UP_TO_8K = 8

    @property
    def multiplier(self) -> int:
        return int(self.value)


_CLASSES = tuple(ResolutionClass)


class CostModelError(ValueError):
    pass


def resolution_class(
    tile_pixels: int, thresholds: Sequence[int] = DEFAULT_COST_THRESHOLDS
) -> ResolutionClass:
    """Class of a tile by pixel count; each upper bound is inclusive."""
    if tile_pixels <= 0:
        raise CostModelError("tile pixel count must be positive")
    for cls, upper in zip(_CLASSES, thresholds):
        if tile_pixels <= upper:
            return cls
    raise CostModelError("resolution beyond cost model")


def encoding_cost_tile(
    tile_pixels: int, mu_e: float, thresholds: Sequence[int] = DEFAULT_COST_THRESHOLDS
) -> float:
    return mu_e * resolution_class(tile_pixels, thresholds).multiplier


def storage_cost_tile(bs: float, mu_s: float) -> float:
    if bs < 0:
        raise CostModelError("data size must be nonnegative")
    return mu_s * bs


def tile_pixels(resolution: Resolution, n_tiles: int) -> int:
    return resolution.pixels // n_tiles


def rep_cost(
    resolution: Resolution,
    z: float,
    data_size_model: PowerFitParams,
    n_tiles: int,
    mu_e: float,
    mu_s: float,
    thresholds: Sequence[int] = DEFAULT_COST_THRESHOLDS,
) -> Tuple[float, float]:
    """Return ``(c_i, s_i)`` for one representation.

    The tiles split the frame area and the modelled data size equally.
    """
    if n_tiles < 1:
        raise CostModelError("n_tiles must be >= 1")
    s_i = max(0.0, eval_model(data_size_model, z))
    bs = s_i / n_tiles
    enc = n_tiles * encoding_cost_tile(tile_pixels(resolution, n_tiles), mu_e, thresholds)
    sto = n_tiles * storage_cost_tile(bs, mu_s)
    return enc + sto, s_i


def encoding_component(
    resolution: Resolution, n_tiles: int, mu_e: float,
    thresholds: Sequence[int] = DEFAULT_COST_THRESHOLDS,
) -> float:
    return n_tiles * encoding_cost_tile(tile_pixels(resolution, n_tiles), mu_e, thresholds)
