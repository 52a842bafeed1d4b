import io
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import ws_mse_loops
from erpladder.sphere import (
    LumaFrame,
    TileRegion,
    Y4MError,
    erp_weight,
    parse_grid,
    parse_y4m,
    sequence_ws_mse,
    tile_grid,
    weighted_error,
    write_y4m,
    ws_mse,
    ws_psnr,
)


def frame(a):
    return LumaFrame.from_array(np.asarray(a, dtype=np.uint8))


def test_weight_examples():
    assert erp_weight(2, 5) == 1.0
    assert erp_weight(0, 2) == pytest.approx(math.cos(-math.pi / 4), abs=1e-12)
    with pytest.raises(ValueError):
        erp_weight(5, 5)
    with pytest.raises(ValueError):
        erp_weight(-1, 5)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 5000), st.data())
def test_weight_symmetry_and_range(h, data):
    y = data.draw(st.integers(0, h - 1))
    w = erp_weight(y, h)
    assert 0 < w <= 1
    assert math.isclose(w, erp_weight(h - 1 - y, h), rel_tol=1e-12)


def test_identical_frames_zero():
    a = frame(np.arange(24).reshape(4, 6))
    assert ws_mse(a, a) == 0.0


def test_hand_example_1x2():
    # Full frame of width 1, height 2, diffs 10 and 20.
    ref = frame([[10], [20]])
    test = frame([[0], [0]])
    assert ws_mse(ref, test) == pytest.approx(250.0, rel=1e-12)


def test_constant_offset_is_d_squared():
    rng = np.random.default_rng(0)
    base = rng.integers(0, 200, size=(256, 512)).astype(np.uint8)
    assert ws_mse(frame(base), frame(base + 7)) == pytest.approx(49, rel=1e-12)


def test_psnr():
    assert ws_psnr(255.0**2) == 0.0
    assert ws_psnr(1.0) == pytest.approx(10 * math.log10(65025), abs=1e-12)
    assert ws_psnr(1.0) == pytest.approx(48.1308, abs=1e-4)
    assert math.isinf(ws_psnr(0.0))
    with pytest.raises(ValueError):
        ws_psnr(-1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.data())
def test_matches_pixel_loop_oracle(h, w, data):
    rng = np.random.default_rng(data.draw(st.integers(0, 2**32 - 1)))
    a = rng.integers(0, 256, size=(h, w)).astype(np.uint8)
    b = rng.integers(0, 256, size=(h, w)).astype(np.uint8)
    y0 = data.draw(st.integers(0, h - 1))
    x0 = data.draw(st.integers(0, w - 1))
    rh = data.draw(st.integers(1, h - y0))
    rw = data.draw(st.integers(1, w - x0))
    r = TileRegion(x0, y0, rw, rh)
    got = ws_mse(frame(a), frame(b), r)
    assert math.isclose(got, ws_mse_loops(a, b, x0, y0, rw, rh), rel_tol=1e-9, abs_tol=1e-12)
    assert got == ws_mse(frame(b), frame(a), r)


def test_region_errors():
    a = frame(np.zeros((4, 4)))
    with pytest.raises(ValueError, match="outside"):
        ws_mse(a, a, TileRegion(2, 2, 3, 1))
    with pytest.raises(ValueError, match="empty"):
        ws_mse(a, a, TileRegion(0, 0, 0, 1))
    with pytest.raises(ValueError, match="dimensions"):
        ws_mse(a, frame(np.zeros((4, 5))))
    with pytest.raises(ValueError):
        LumaFrame(2, 2, np.zeros(3, dtype=np.uint8))


def test_tile_grid_remainders():
    tiles = tile_grid(11, 7, 2, 3)
    assert [(t.x0, t.y0, t.w, t.h) for t in tiles] == [
        (0, 0, 3, 3), (3, 0, 3, 3), (6, 0, 5, 3),
        (0, 3, 3, 4), (3, 3, 3, 4), (6, 3, 5, 4),
    ]
    assert sum(t.w * t.h for t in tiles) == 77
    assert parse_grid("2x5") == (2, 5)
    with pytest.raises(ValueError):
        parse_grid("2by5")


def test_tile_aggregation_identity():
    rng = np.random.default_rng(5)
    a = rng.integers(0, 256, size=(37, 53)).astype(np.uint8)
    b = rng.integers(0, 256, size=(37, 53)).astype(np.uint8)
    fa, fb = frame(a), frame(b)
    parts = [(ws_mse(fa, fb, t), weighted_error(fa, fb, t)[1]) for t in tile_grid(53, 37, 3, 4)]
    combined = math.fsum(m * q for m, q in parts) / math.fsum(q for _, q in parts)
    assert math.isclose(combined, ws_mse(fa, fb), rel_tol=1e-9)


def y4m_bytes(frames, colorspace="C420", extra=b""):
    h, w = frames[0].shape
    out = io.BytesIO()
    out.write(f"YUV4MPEG2 W{w} H{h} F30:1 {colorspace}\n".encode())
    chroma = 0 if colorspace == "Cmono" else 2 * ((w + 1) // 2) * ((h + 1) // 2)
    for f in frames:
        out.write(b"FRAME" + extra + b"\n" + f.astype(np.uint8).tobytes() + bytes(chroma))
    return out.getvalue()


def test_y4m_one_4x2_frame():
    payload = bytes(range(12))
    w, h, it = parse_y4m(io.BytesIO(b"YUV4MPEG2 W4 H2 F30:1 C420\nFRAME\n" + payload))
    frames = list(it)
    assert (w, h, len(frames)) == (4, 2, 1)
    assert frames[0].samples.tobytes() == payload[:8]


def test_y4m_header_only_and_mono_and_frame_params():
    w, h, it = parse_y4m(io.BytesIO(b"YUV4MPEG2 W8 H4 F25:1 C420jpeg\n"))
    assert (w, h, list(it)) == (8, 4, [])
    data = y4m_bytes([np.full((2, 3), 9), np.full((2, 3), 4)], colorspace="Cmono", extra=b" Ixyz")
    _, _, it = parse_y4m(io.BytesIO(data))
    assert [int(f.samples[0, 0]) for f in it] == [9, 4]


@pytest.mark.parametrize("data, message", [
    (b"YUV4MPEG W4 H2\n", "bad signature"),
    (b"YUV4MPEG2 W4 F30:1\n", "missing W/H"),
    (b"YUV4MPEG2 W4 H2 C444\n", "unsupported"),
])
def test_y4m_header_errors(data, message):
    with pytest.raises(Y4MError, match=message):
        parse_y4m(io.BytesIO(data))


def test_y4m_truncated():
    _, _, it = parse_y4m(io.BytesIO(b"YUV4MPEG2 W4 H2 F30:1 C420\nFRAME\n" + bytes(5)))
    with pytest.raises(Y4MError, match="truncated frame 0"):
        list(it)


def test_writer_roundtrip():
    rng = np.random.default_rng(2)
    frames = [rng.integers(0, 256, size=(6, 10)).astype(np.uint8) for _ in range(3)]
    buf = io.BytesIO()
    write_y4m(buf, frames)
    buf.seek(0)
    _, _, it = parse_y4m(buf)
    for got, want in zip(it, frames):
        assert np.array_equal(got.samples, want)


def test_sequence_scores():
    rng = np.random.default_rng(9)
    ref = [rng.integers(0, 200, size=(20, 40)).astype(np.uint8) for _ in range(3)]
    same = sequence_ws_mse((frame(a) for a in ref), (frame(a) for a in ref), 2, 5)
    assert same.tile_ws_mse == (0.0,) * 10 and math.isinf(same.full_ws_psnr)
    off = sequence_ws_mse((frame(a) for a in ref), (frame(a + 3) for a in ref), 2, 5)
    assert all(v == pytest.approx(9.0, rel=1e-12) for v in off.tile_ws_mse)
    noisy = [rng.integers(0, 256, size=(20, 40)).astype(np.uint8) for _ in range(3)]
    one = sequence_ws_mse((frame(a) for a in ref), (frame(b) for b in noisy), 1, 1)
    mean = math.fsum(ws_mse(frame(a), frame(b)) for a, b in zip(ref, noisy)) / 3
    assert one.tile_ws_mse[0] == pytest.approx(mean, rel=1e-12)
    assert one.full_ws_mse == pytest.approx(mean, rel=1e-12)


def test_sequence_order_independent():
    rng = np.random.default_rng(4)
    ref = [rng.integers(0, 256, size=(8, 16)).astype(np.uint8) for _ in range(5)]
    tst = [rng.integers(0, 256, size=(8, 16)).astype(np.uint8) for _ in range(5)]
    fwd = sequence_ws_mse(map(frame, ref), map(frame, tst), 2, 2)
    rev = sequence_ws_mse(map(frame, ref[::-1]), map(frame, tst[::-1]), 2, 2)
    assert fwd == rev


def test_sequence_mismatch():
    a = [frame(np.zeros((4, 4)))]
    with pytest.raises(ValueError, match="frame count"):
        sequence_ws_mse(iter(a * 2), iter(a), 1, 1)
    with pytest.raises(ValueError, match="dimensions"):
        sequence_ws_mse(iter(a), iter([frame(np.zeros((4, 6)))]), 1, 1)
