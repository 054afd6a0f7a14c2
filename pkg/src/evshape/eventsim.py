"""Contrast-threshold event simulation from intensity-frame sequences.

Per pixel, a reference log level tracks the last event; log intensity is
interpolated linearly between frames and one event fires per threshold
multiple crossed, timestamped at the crossing. Per-event threshold jitter and
per-frame log-intensity noise model sensor non-idealities.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import FormatError
from .render import IntensityFrame

_MAGIC = b"EVT1"
_HEADER = struct.Struct("<4sHHQ")
_RECORD_DTYPE = np.dtype([("x", "<u2"), ("y", "<u2"), ("t", "<i8"), ("p", "i1"), ("pad", "i1")])
# An event may fire the moment the interpolated log reaches its level; this
# slack absorbs float residue from log/exp roundtrips without breaking the
# CT-doubling monotonicity.
_CROSS_TOL = 1e-9
_MIN_CT = 0.01


@dataclass(frozen=True)
class Event:
    x: int
    y: int
    t: int
    p: int


@dataclass(frozen=True)
class EventStream:
    """Column-major event storage sorted by (t, y, x, p)."""

    x: np.ndarray
    y: np.ndarray
    t: np.ndarray
    p: np.ndarray
    width: int
    height: int

    def __post_init__(self):
        x = np.ascontiguousarray(np.asarray(self.x, dtype=np.uint16))
        y = np.ascontiguousarray(np.asarray(self.y, dtype=np.uint16))
        t = np.ascontiguousarray(np.asarray(self.t, dtype=np.int64))
        p = np.ascontiguousarray(np.asarray(self.p, dtype=np.int8))
        if not (len(x) == len(y) == len(t) == len(p)):
            raise ValueError("event columns must have equal length")
        if len(t) > 1 and np.any(np.diff(t) < 0):
            raise ValueError("timestamps must be non-decreasing")
        if len(p) and not np.all(np.abs(p) == 1):
            raise ValueError("polarity must be -1 or +1")
        if len(x) and (x.max() >= self.width or y.max() >= self.height):
            raise ValueError("event coordinates outside sensor dims")
        for a in (x, y, t, p):
            a.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Event:
        return Event(int(self.x[i]), int(self.y[i]), int(self.t[i]), int(self.p[i]))

    @classmethod
    def empty(cls, width: int, height: int) -> "EventStream":
        z = np.zeros(0)
        return cls(z, z, z, z, width, height)


@dataclass(frozen=True)
class SimConfig:
    """Contrast threshold CT, per-polarity jitter std (pos, neg), log noise std."""

    ct: float = 0.2
    sigma_c: tuple[float, float] = (0.03, 0.03)
    sigma_n: float = 0.1
    log_eps: float = 1e-3
    seed: int = 0

    def __post_init__(self):
        if self.ct <= 0:
            raise ValueError("contrast threshold must be positive")
        if min(self.sigma_c) < 0 or self.sigma_n < 0:
            raise ValueError("noise stds must be non-negative")


def simulate_events(frames: list[IntensityFrame], cfg: SimConfig) -> EventStream:
    """Emit the event stream for a frame sequence (>= 2 frames, equal dims)."""
    if len(frames) < 2:
        raise ValueError("need at least 2 frames to simulate events")
    shape = frames[0].shape
    times = np.array([f.t_us for f in frames], dtype=np.int64)
    if np.any(np.diff(times) <= 0):
        raise ValueError("frame timestamps must be strictly increasing")
    for f in frames:
        if f.shape != shape:
            raise ValueError("all frames must share dimensions")
    h, w = shape
    rng = np.random.Generator(np.random.PCG64(cfg.seed))

    logs = np.stack([np.log(f.pixels + cfg.log_eps) for f in frames])
    if cfg.sigma_n > 0:
        logs = logs + rng.normal(0.0, cfg.sigma_n, logs.shape)

    xs_grid = np.tile(np.arange(w, dtype=np.uint16), h)
    ys_grid = np.repeat(np.arange(h, dtype=np.uint16), w)
    ref = logs[0].reshape(-1).copy()

    out_x, out_y, out_t, out_p = [], [], [], []
    for k in range(len(frames) - 1):
        l0 = logs[k].reshape(-1)
        l1 = logs[k + 1].reshape(-1)
        t0, t1 = times[k], times[k + 1]
        span = float(t1 - t0)
        slope = l1 - l0
        # Greedy crossing walk: each pending pixel attempts one event per
        # round with a freshly sampled threshold; a failed attempt retires the
        # pixel for this interval (log intensity is monotone within it).
        pending = np.abs(l1 - ref) >= _MIN_CT - _CROSS_TOL
        while pending.any():
            idx = np.flatnonzero(pending)
            d = np.sign(l1[idx] - ref[idx])
            sig = np.where(d > 0, cfg.sigma_c[0], cfg.sigma_c[1])
            if np.any(sig > 0):
                ct_eff = np.maximum(cfg.ct + rng.standard_normal(idx.size) * sig, _MIN_CT)
            else:
                ct_eff = np.full(idx.size, cfg.ct)
            level = ref[idx] + d * ct_eff
            fired = d * (l1[idx] - level) >= -_CROSS_TOL
            pending[idx[~fired]] = False
            if not fired.any():
                break
            fi = idx[fired]
            lv = level[fired]
            dl = slope[fi]
            frac = np.where(np.abs(dl) > 0, (lv - l0[fi]) / np.where(dl == 0, 1.0, dl), 0.0)
            ts = t0 + np.rint(np.clip(frac, 0.0, 1.0) * span).astype(np.int64)
            out_x.append(xs_grid[fi])
            out_y.append(ys_grid[fi])
            out_t.append(ts)
            out_p.append(d[fired].astype(np.int8))
            ref[fi] = lv
            pending[fi] = np.abs(l1[fi] - ref[fi]) >= _MIN_CT - _CROSS_TOL

    if not out_x:
        return EventStream.empty(w, h)
    x = np.concatenate(out_x)
    y = np.concatenate(out_y)
    t = np.concatenate(out_t)
    p = np.concatenate(out_p)
    order = np.lexsort((p, x, y, t))
    return EventStream(x[order], y[order], t[order], p[order], w, h)


def write_events(stream: EventStream, path) -> None:
    """Binary format: 16-byte header (EVT1, dims, count) + 14-byte records."""
    rec = np.empty(len(stream), dtype=_RECORD_DTYPE)
    rec["x"] = stream.x
    rec["y"] = stream.y
    rec["t"] = stream.t
    rec["p"] = stream.p
    rec["pad"] = 0
    header = _HEADER.pack(_MAGIC, stream.width, stream.height, len(stream))
    Path(path).write_bytes(header + rec.tobytes())


def read_events(path) -> EventStream:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise FormatError(f"{path}: truncated header")
    magic, width, height, count = _HEADER.unpack_from(raw)
    if magic != _MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}")
    body = raw[_HEADER.size :]
    if len(body) != count * _RECORD_DTYPE.itemsize:
        raise FormatError(
            f"{path}: expected {count * _RECORD_DTYPE.itemsize} record bytes, got {len(body)}"
        )
    rec = np.frombuffer(body, dtype=_RECORD_DTYPE)
    return EventStream(rec["x"].copy(), rec["y"].copy(), rec["t"].copy(), rec["p"].copy(), width, height)
