"""Spherically weighted distortion (WS-MSE / WS-PSNR) for ERP luma frames.

Regions are scored with the weights of their rows in the *full* frame, so a
tile near a pole is discounted exactly as it would be in a full-frame score.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import BinaryIO, Iterator, List, Optional, Sequence, Tuple

import numpy as np


class Y4MError(ValueError):
    pass


@dataclass(frozen=True)
class LumaFrame:
    width: int
    height: int
    samples: np.ndarray  # (height, width) uint8

    def __post_init__(self):
        a = np.asarray(self.samples)
        if a.ndim == 1:
            if a.size != self.width * self.height:
                raise ValueError("sample count does not match width*height")
            a = a.reshape(self.height, self.width)
        elif a.shape != (self.height, self.width):
            raise ValueError("sample array shape does not match frame size")
        object.__setattr__(self, "samples", a)

    @classmethod
    def from_array(cls, a) -> "LumaFrame":
        a = np.asarray(a)
        return cls(a.shape[1], a.shape[0], a)


@dataclass(frozen=True)
class TileRegion:
    x0: int
    y0: int
    w: int
    h: int

    def check(self, width: int, height: int) -> None:
        if self.w <= 0 or self.h <= 0:
            raise ValueError("empty region")
        if self.x0 < 0 or self.y0 < 0 or self.x0 + self.w > width or self.y0 + self.h > height:
            raise ValueError("region outside frame")


def erp_weight(y, h_full: int):
    """Row weight ``cos((y + 0.5 - H/2) * pi / H)``; accepts scalars or arrays."""
    ya = np.asarray(y)
    if h_full <= 0:
        raise ValueError("frame height must be positive")
    if np.any((ya < 0) | (ya >= h_full)):
        raise ValueError("row index out of range")
    out = np.cos((ya + 0.5 - h_full / 2.0) * math.pi / h_full)
    return float(out) if out.ndim == 0 else out


def _row_terms(reference: LumaFrame, test: LumaFrame, region: TileRegion):
    if (reference.width, reference.height) != (test.width, test.height):
        raise ValueError("frame dimensions differ")
    region.check(reference.width, reference.height)
    ys = slice(region.y0, region.y0 + region.h)
    xs = slice(region.x0, region.x0 + region.w)
    diff = reference.samples[ys, xs].astype(np.int64) - test.samples[ys, xs].astype(np.int64)
    # Integer row sums are exact; only the weighted combination rounds.
    row_sq = (diff * diff).sum(axis=1)
    q = erp_weight(np.arange(region.y0, region.y0 + region.h), reference.height)
    return row_sq, np.atleast_1d(q)


def weighted_error(reference: LumaFrame, test: LumaFrame, region: TileRegion) -> Tuple[float, float]:
    """``(sum of q * err**2, sum of q)`` over the region."""
    row_sq, q = _row_terms(reference, test, region)
    num = math.fsum((q * row_sq).tolist())
    den = math.fsum(q.tolist()) * region.w
    return num, den


def ws_mse(reference: LumaFrame, test: LumaFrame, region: Optional[TileRegion] = None) -> float:
    if region is None:
        region = TileRegion(0, 0, reference.width, reference.height)
    num, den = weighted_error(reference, test, region)
    return num / den


def ws_psnr(mse: float, max_value: float = 255.0) -> float:
    """PSNR over a WS-MSE value; ``inf`` for a perfect match."""
    if mse < 0:
        raise ValueError("mse must be nonnegative")
    if max_value <= 0:
        raise ValueError("max_value must be positive")
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(max_value * max_value / mse)


def tile_grid(width: int, height: int, rows: int, cols: int) -> List[TileRegion]:
    """Row-major grid; the last row and column absorb remainder pixels."""
    if rows < 1 or cols < 1:
        raise ValueError("grid needs at least one row and column")
    if rows > height or cols > width:
        raise ValueError("grid finer than the frame")
    th, tw = height // rows, width // cols
    tiles = []
    for r in range(rows):
        for c in range(cols):
            h = th if r < rows - 1 else height - th * (rows - 1)
            w = tw if c < cols - 1 else width - tw * (cols - 1)
            tiles.append(TileRegion(c * tw, r * th, w, h))
    return tiles


def parse_grid(text: str) -> Tuple[int, int]:
    m = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", text)
    if not m:
        raise ValueError(f"grid must look like RxC, got {text!r}")
    return int(m.group(1)), int(m.group(2))


# --- Y4M ---------------------------------------------------------------------

_SIGNATURE = b"YUV4MPEG2"


def _read_line(stream: BinaryIO, limit: int = 4096) -> Optional[bytes]:
    buf = bytearray()
    while True:
        ch = stream.read(1)
        if not ch:
            return bytes(buf) if buf else None
        if ch == b"\n":
            return bytes(buf)
        buf += ch
        if len(buf) > limit:
            raise Y4MError("header line too long")


def _chroma_bytes(colorspace: str, width: int, height: int) -> int:
    if colorspace.startswith("420"):
        return 2 * ((width + 1) // 2) * ((height + 1) // 2)
    if colorspace.startswith("mono"):
        return 0
    raise Y4MError(f"unsupported colour space C{colorspace}")


def parse_y4m(stream: BinaryIO) -> Tuple[int, int, Iterator[LumaFrame]]:
    """Read the stream header and return ``(width, height, luma frames)``."""
    header = _read_line(stream)
    if header is None or not header.startswith(_SIGNATURE):
        raise Y4MError("bad signature")
    params = {}
    for tok in header[len(_SIGNATURE):].split():
        params[chr(tok[0])] = tok[1:].decode("ascii", "replace")
    try:
        width, height = int(params["W"]), int(params["H"])
    except (KeyError, ValueError):
        raise Y4MError("missing W/H") from None
    if width <= 0 or height <= 0:
        raise Y4MError("missing W/H")
    colorspace = params.get("C", "420")
    luma = width * height
    frame_bytes = luma + _chroma_bytes(colorspace, width, height)

    def frames() -> Iterator[LumaFrame]:
        index = 0
        while True:
            line = _read_line(stream)
            if line is None:
                return
            if not line.startswith(b"FRAME"):
                raise Y4MError(f"expected FRAME header before frame {index}")
            payload = stream.read(frame_bytes)
            if len(payload) < frame_bytes:
                raise Y4MError(f"truncated frame {index}")
            y = np.frombuffer(payload, dtype=np.uint8, count=luma).reshape(height, width)
            yield LumaFrame(width, height, y)
            index += 1

    return width, height, frames()


def write_y4m(stream: BinaryIO, frames: Sequence[np.ndarray], fps: str = "30:1") -> None:
    """Write luma arrays as a 4:2:0 stream with neutral chroma."""
    if not frames:
        raise ValueError("no frames")
    h, w = frames[0].shape
    stream.write(f"YUV4MPEG2 W{w} H{h} F{fps} Ip A1:1 C420\n".encode("ascii"))
    chroma = bytes([128]) * _chroma_bytes("420", w, h)
    for f in frames:
        stream.write(b"FRAME\n")
        stream.write(np.ascontiguousarray(f, dtype=np.uint8).tobytes())
        stream.write(chroma)


@dataclass(frozen=True)
class SequenceScore:
    tile_ws_mse: Tuple[float, ...]
    full_ws_mse: float
    n_frames: int

    @property
    def full_ws_psnr(self) -> float:
        return ws_psnr(self.full_ws_mse)


def sequence_ws_mse(
    reference: Iterator[LumaFrame], test: Iterator[LumaFrame], rows: int, cols: int
) -> SequenceScore:
    """Per-tile and full-frame WS-MSE, each averaged over frames."""
    tiles = None
    tile_vals: List[List[float]] = []
    full_vals: List[float] = []
    ref_it, test_it = iter(reference), iter(test)
    n = 0
    while True:
        a = next(ref_it, None)
        b = next(test_it, None)
        if a is None and b is None:
            break
        if a is None or b is None:
            raise ValueError("streams differ in frame count")
        if (a.width, a.height) != (b.width, b.height):
            raise ValueError("frame dimensions differ")
        if tiles is None:
            tiles = tile_grid(a.width, a.height, rows, cols)
            tile_vals = [[] for _ in tiles]
        nums, dens = [], []
        for j, t in enumerate(tiles):
            num, den = weighted_error(a, b, t)
            tile_vals[j].append(num / den)
            nums.append(num)
            dens.append(den)
        full_vals.append(math.fsum(nums) / math.fsum(dens))
        n += 1
    if n == 0:
        raise ValueError("no frames to score")
    # fsum keeps the mean independent of frame order.
    return SequenceScore(
        tuple(math.fsum(v) / n for v in tile_vals), math.fsum(full_vals) / n, n
    )
