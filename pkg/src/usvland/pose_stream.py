"""Buffering of asynchronous deck pose observations and fixed-rate resampling."""

from __future__ import annotations

import csv
import math
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np

POSE_COLUMNS = ("t", "b1", "b2", "b3", "b4", "b5", "b6")

DEFAULT_RETENTION = 25.0
DEFAULT_SPAN = 20.0
MAX_GAP = 0.5


class NotReady(Exception):
    """The buffer cannot yet provide the requested window.

    This is a waiting condition rather than a failure: callers retry later.
    """


@dataclass(frozen=True)
class PoseSample:
    t: float
    b: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.b, dtype=float).reshape(6)
        if not (math.isfinite(self.t) and np.all(np.isfinite(b))):
            raise ValueError("pose sample must be finite")
        if abs(b[3]) > math.pi / 2 or abs(b[4]) > math.pi / 2:
            raise ValueError("tilt angles must lie within [-pi/2, pi/2]")
        object.__setattr__(self, "b", b)


@dataclass(frozen=True)
class SampleWindow:
    t0: float
    dt: float
    values: np.ndarray  # shape (n, 6)

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if len(values) < 2:
            raise ValueError("a window needs at least two samples")
        if not np.all(np.isfinite(values)):
            raise ValueError("window values must be finite")
        object.__setattr__(self, "values", values)

    @property
    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.values))

    @property
    def rate(self) -> float:
        return 1.0 / self.dt

    def axis(self, j: int) -> np.ndarray:
        """Values of axis ``j`` (1-based, as in ``b1..b6``)."""
        return self.values[:, j - 1]


class PoseBuffer:
    """Time-ordered pose buffer that evicts samples older than ``retention`` seconds."""

    def __init__(self, retention: float = DEFAULT_RETENTION, max_gap: float = MAX_GAP):
        if not retention > 0:
            raise ValueError("retention must be positive")
        self.retention = retention
        self.max_gap = max_gap
        self._t: deque[float] = deque()
        self._b: deque[np.ndarray] = deque()

    def __len__(self) -> int:
        return len(self._t)

    @property
    def last_t(self) -> float | None:
        return self._t[-1] if self._t else None

    @property
    def first_t(self) -> float | None:
        return self._t[0] if self._t else None

    def push(self, sample: PoseSample) -> PoseBuffer:
        if self._t and not sample.t > self._t[-1]:
            raise ValueError(
                f"non-monotonic timestamp {sample.t!r} after {self._t[-1]!r}"
            )
        self._t.append(float(sample.t))
        self._b.append(sample.b)
        horizon = sample.t - self.retention
        while self._t and self._t[0] < horizon:
            self._t.popleft()
            self._b.popleft()
        return self

    def arrays(self) -> tuple[np.ndarray, np.ndarray]:
        if not self._t:
            return np.empty(0), np.empty((0, 6))
        return np.fromiter(self._t, float, len(self._t)), np.stack(self._b)

    def clear(self) -> None:
        self._t.clear()
        self._b.clear()


def push_sample(buffer: PoseBuffer, sample: PoseSample) -> PoseBuffer:
    return buffer.push(sample)


def interpolate(t: np.ndarray, b: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """Linear interpolation of each column of ``b`` onto ``grid``."""
    out = np.empty((len(grid), b.shape[1]))
    for j in range(b.shape[1]):
        out[:, j] = np.interp(grid, t, b[:, j])
    return out


def resample_window(
    buffer: PoseBuffer,
    span: float = DEFAULT_SPAN,
    rate: float = 30.0,
    end: float | None = None,
) -> SampleWindow:
    """Uniform window of the most recent ``span`` seconds at ``rate`` Hz.

    The grid ends at ``end`` (default: the newest sample) and holds
    ``floor(span * rate) + 1`` points.

    Raises:
        NotReady: the buffer does not cover the span, or a gap longer than
            ``buffer.max_gap`` falls inside it.
    """
    if not rate > 0:
        raise ValueError("rate must be positive")
    t, b = buffer.arrays()
    if len(t) < 2:
        raise NotReady("fewer than two samples buffered")
    t_end = t[-1] if end is None else float(end)
    if t_end > t[-1] + 1e-12:
        raise NotReady("window end beyond the newest sample")
    n = int(math.floor(span * rate + 1e-9)) + 1
    dt = 1.0 / rate
    t0 = t_end - (n - 1) * dt
    if t0 < t[0] - 1e-9:
        raise NotReady(f"buffer spans {t[-1] - t[0]:.3f} s, need {span:.3f} s")
    lo = max(np.searchsorted(t, t0, side="right") - 1, 0)
    hi = np.searchsorted(t, t_end, side="left") + 1
    if len(t[lo:hi]) > 1 and np.max(np.diff(t[lo:hi])) > buffer.max_gap:
        raise NotReady("data gap inside the window")
    grid = t0 + dt * np.arange(n)
    return SampleWindow(t0=float(t0), dt=dt, values=interpolate(t[lo:hi], b[lo:hi], grid))


def read_pose_csv(path: str | Path) -> list[PoseSample]:
    """Read a ``t,b1,...,b6`` pose log."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        missing = set(POSE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise ValueError(f"pose log lacks columns: {sorted(missing)}")
        return [
            PoseSample(float(row["t"]), np.array([float(row[f"b{j}"]) for j in range(1, 7)]))
            for row in reader
        ]


def write_pose_csv(path: str | Path, samples) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(POSE_COLUMNS)
        for s in samples:
            w.writerow([repr(float(s.t))] + [repr(float(v)) for v in s.b])
