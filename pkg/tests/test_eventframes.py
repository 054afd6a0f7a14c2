import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from evshape.camera import Trajectory, look_at
from evshape.eventframes import (
    EventFrame,
    assign_poses,
    bin_events,
    denoise_frame,
    frame_to_image,
)
from evshape.eventsim import EventStream


def _random_stream(n, seed, w=16, h=12):
    rng = np.random.default_rng(seed)
    return EventStream(
        rng.integers(0, w, n), rng.integers(0, h, n),
        np.sort(rng.integers(0, 10_000, n)), rng.choice([-1, 1], n),
        width=w, height=h,
    )


def test_bin_counts_exact():
    frames = bin_events(_random_stream(300, 0), 100)
    assert len(frames) == 3
    assert all(f.total() == 100 for f in frames)


def test_single_event_bin():
    s = EventStream(np.array([3]), np.array([2]), np.array([50]), np.array([1]), 16, 12)
    frames = bin_events(s, 1)
    assert len(frames) == 1
    f = frames[0]
    assert f.pos[2, 3] == 1 and f.pos.sum() == 1 and f.neg.sum() == 0
    assert f.t_start == f.t_end == 50


def test_remainder_events_dropped():
    frames = bin_events(_random_stream(1000, 1), 250)
    assert len(frames) == 4
    assert sum(f.total() for f in frames) == 1000
    frames = bin_events(_random_stream(1001, 2), 250)
    assert len(frames) == 4
    assert sum(f.total() for f in frames) == 1000


@given(st.integers(1, 400), st.integers(1, 50), st.integers(0, 2**31 - 1))
@settings(max_examples=60, deadline=None)
def test_bin_conservation_property(n, count, seed):
    stream = _random_stream(n, seed)
    frames = bin_events(stream, count)
    assert len(frames) == n // count
    assert sum(f.total() for f in frames) == (n // count) * count


def test_bin_windows_ordered():
    frames = bin_events(_random_stream(500, 3), 100)
    for f in frames:
        assert f.t_start <= f.t_end
    for a, b in zip(frames, frames[1:]):
        assert a.t_end <= b.t_start


def test_bin_count_validation():
    with pytest.raises(ValueError):
        bin_events(_random_stream(10, 0), 0)


def test_frame_to_image_empty():
    f = EventFrame(np.zeros((4, 4), int), np.zeros((4, 4), int), 0, 1)
    assert frame_to_image(f).sum() == 0


def test_frame_to_image_clamps_at_255():
    pos = np.zeros((4, 4), int)
    pos[1, 2] = 300
    img = frame_to_image(EventFrame(pos, np.zeros((4, 4), int), 0, 1))
    assert img[1, 2, 0] == 255


def test_frame_to_image_third_channel_zero():
    f = bin_events(_random_stream(200, 4), 50)[0]
    assert frame_to_image(f)[:, :, 2].sum() == 0


def test_frame_to_image_injective_below_clamp():
    pos = np.arange(16).reshape(4, 4) % 200
    neg = (np.arange(16).reshape(4, 4) * 3) % 200
    img = frame_to_image(EventFrame(pos, neg, 0, 1))
    assert np.array_equal(img[:, :, 0], pos)
    assert np.array_equal(img[:, :, 1], neg)


def test_denoise_zero_threshold_is_identity():
    f = bin_events(_random_stream(200, 5), 50)[0]
    d = denoise_frame(f, 0)
    assert np.array_equal(d.pos, f.pos) and np.array_equal(d.neg, f.neg)


def test_denoise_removes_isolated_pixel():
    pos = np.zeros((4, 4), int)
    pos[2, 2] = 1
    d = denoise_frame(EventFrame(pos, np.zeros((4, 4), int), 0, 1), 2)
    assert d.total() == 0


@given(st.integers(0, 2**31 - 1), st.integers(0, 5))
@settings(max_examples=40, deadline=None)
def test_denoise_never_increases_mass(seed, min_count):
    f = bin_events(_random_stream(300, seed), 300)[0]
    d = denoise_frame(f, min_count)
    assert d.total() <= f.total()
    assert np.all(d.pos <= f.pos) and np.all(d.neg <= f.neg)


def test_assign_poses_nearest_midpoint():
    poses = [look_at((3, 1, z), (0, 0, 0)) for z in (1, 2, 3)]
    traj = Trajectory(tuple(poses), np.array([0, 1000, 2000]))
    frames = [
        EventFrame(np.zeros((2, 2), int), np.zeros((2, 2), int), 900, 1100),   # mid 1000
        EventFrame(np.zeros((2, 2), int), np.zeros((2, 2), int), 1800, 2600),  # mid 2200
        EventFrame(np.zeros((2, 2), int), np.zeros((2, 2), int), 0, 998),      # mid 499 -> tie-free
    ]
    paired = assign_poses(frames, traj)
    assert paired[0][0].pose_t_us == 1000 and paired[0][1] is poses[1]
    assert paired[1][0].pose_t_us == 2000 and paired[1][1] is poses[2]
    assert paired[2][0].pose_t_us == 0 and paired[2][1] is poses[0]


def test_event_frame_validation():
    with pytest.raises(ValueError):
        EventFrame(np.full((2, 2), -1), np.zeros((2, 2), int), 0, 1)
    with pytest.raises(ValueError):
        EventFrame(np.zeros((2, 2), int), np.zeros((3, 2), int), 0, 1)
