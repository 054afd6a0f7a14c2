import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evshape.errors import FormatError
from evshape.eventsim import (
    EventStream,
    SimConfig,
    read_events,
    simulate_events,
    write_events,
)
from evshape.render import IntensityFrame

NOISELESS = dict(sigma_c=(0.0, 0.0), sigma_n=0.0)


def _ramp_frames(k_grid, ct=0.2, dt_us=30_000_000, base=0.05, eps=1e-3):
    """Two frames whose per-pixel log intensity rises by k·CT."""
    base_img = np.full(k_grid.shape, base)
    l0 = np.log(base_img + eps)
    l1 = l0 + ct * k_grid
    return [
        IntensityFrame(base_img, 0),
        IntensityFrame(np.exp(l1) - eps, dt_us),
    ]


def test_constant_video_produces_no_events():
    frames = [IntensityFrame(np.full((4, 4), 0.5), t) for t in (0, 1000, 2000)]
    stream = simulate_events(frames, SimConfig(ct=0.2, **NOISELESS))
    assert len(stream) == 0


def test_exact_crossing_counts_and_times():
    k = np.array([[3.0]])
    stream = simulate_events(_ramp_frames(k), SimConfig(ct=0.2, **NOISELESS))
    assert len(stream) == 3
    assert np.array_equal(stream.t, [10_000_000, 20_000_000, 30_000_000])
    assert np.all(stream.p == 1)


def test_falling_intensity_negative_polarity():
    k = np.array([[-2.0]])
    stream = simulate_events(_ramp_frames(k), SimConfig(ct=0.2, **NOISELESS))
    assert len(stream) == 2
    assert np.all(stream.p == -1)


def test_noise_triggers_events_on_constant_video():
    # zero-mean gaussian noise with std 0.1 in log space
    frames = [IntensityFrame(np.full((100, 100), 0.5), t) for t in (0, 1000, 2000)]
    stream = simulate_events(frames, SimConfig(ct=0.2, sigma_c=(0, 0), sigma_n=0.1, seed=1))
    assert len(stream) > 0


def test_requires_two_frames():
    with pytest.raises(ValueError):
        simulate_events([IntensityFrame(np.zeros((2, 2)))], SimConfig())


def test_determinism_same_seed():
    rng = np.random.default_rng(5)
    frames = [IntensityFrame(rng.uniform(0.1, 0.9, (16, 16)), t * 1000) for t in range(5)]
    cfg = SimConfig(ct=0.15, sigma_c=(0.03, 0.03), sigma_n=0.05, seed=9)
    a = simulate_events(frames, cfg)
    b = simulate_events(frames, cfg)
    for col in ("x", "y", "t", "p"):
        assert np.array_equal(getattr(a, col), getattr(b, col))


def test_stream_sorted_with_tiebreak():
    rng = np.random.default_rng(6)
    frames = [IntensityFrame(rng.uniform(0.1, 0.9, (12, 12)), t * 777) for t in range(4)]
    s = simulate_events(frames, SimConfig(ct=0.1, **NOISELESS))
    key = np.stack([s.t, s.y, s.x, s.p])
    assert np.all(np.lexsort(key[::-1]) == np.arange(len(s)))


def _per_pixel_counts(stream, shape):
    grid = np.zeros(shape, dtype=int)
    np.add.at(grid, (stream.y.astype(int), stream.x.astype(int)), 1)
    return grid


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_doubling_ct_never_increases_counts(seed):
    rng = np.random.default_rng(seed)
    frames = [IntensityFrame(rng.uniform(0.05, 0.95, (6, 6)), t * 1000) for t in range(5)]
    lo = simulate_events(frames, SimConfig(ct=0.1, **NOISELESS))
    hi = simulate_events(frames, SimConfig(ct=0.2, **NOISELESS))
    assert np.all(_per_pixel_counts(hi, (6, 6)) <= _per_pixel_counts(lo, (6, 6)))


@given(st.integers(0, 2**31 - 1))
@settings(max_examples=25, deadline=None)
def test_signed_count_matches_net_change(seed):
    rng = np.random.default_rng(seed)
    ct = 0.15
    imgs = rng.uniform(0.05, 0.95, (5, 6, 6))
    frames = [IntensityFrame(imgs[i], i * 1000) for i in range(5)]
    s = simulate_events(frames, SimConfig(ct=ct, **NOISELESS))
    signed = np.zeros((6, 6))
    np.add.at(signed, (s.y.astype(int), s.x.astype(int)), s.p)
    net = (np.log(imgs[-1] + 1e-3) - np.log(imgs[0] + 1e-3)) / ct
    assert np.abs(signed - net).max() <= 1.0 + 1e-6


def test_event_file_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    n = 10_000
    t = np.sort(rng.integers(0, 1_000_000, n))
    stream = EventStream(
        rng.integers(0, 64, n), rng.integers(0, 48, n), t,
        rng.choice([-1, 1], n), width=64, height=48,
    )
    path = tmp_path / "events.evt"
    write_events(stream, path)
    assert path.stat().st_size == 16 + 14 * n
    back = read_events(path)
    assert back.width == 64 and back.height == 48
    for col in ("x", "y", "t", "p"):
        assert np.array_equal(getattr(back, col), getattr(stream, col))


def test_empty_stream_roundtrip(tmp_path):
    path = tmp_path / "empty.evt"
    write_events(EventStream.empty(10, 10), path)
    assert path.stat().st_size == 16
    assert len(read_events(path)) == 0


def test_bad_magic_rejected(tmp_path):
    path = tmp_path / "bad.evt"
    path.write_bytes(b"NOPE" + b"\x00" * 12)
    with pytest.raises(FormatError):
        read_events(path)


def test_trailing_bytes_rejected(tmp_path):
    path = tmp_path / "trunc.evt"
    write_events(EventStream.empty(4, 4), path)
    path.write_bytes(path.read_bytes() + b"\x01\x02\x03")
    with pytest.raises(FormatError):
        read_events(path)


def test_stream_validates_polarity_and_bounds():
    with pytest.raises(ValueError):
        EventStream(np.array([0]), np.array([0]), np.array([0]), np.array([2]), 4, 4)
    with pytest.raises(ValueError):
        EventStream(np.array([5]), np.array([0]), np.array([0]), np.array([1]), 4, 4)
    with pytest.raises(ValueError):
        EventStream(np.array([0, 0]), np.array([0, 0]), np.array([5, 1]), np.array([1, 1]), 4, 4)
