"""Synthetic ground truth: multi-mode deck motion, pose sensors, UAV plant, touchdown."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .pose_stream import PoseSample
from .uav_model import ACC, POS, STATE_DIM, VEL


@dataclass
class WaveSpec:
    """Per-axis sums of sinusoids ``A sin(2 pi f t + phi)`` plus offsets.

    ``modes[j]`` holds ``(f, A, phi)`` rows for axis ``b{j+1}``.
    """

    modes: list[np.ndarray] = field(default_factory=lambda: [np.zeros((0, 3)) for _ in range(6)])
    offset: np.ndarray = field(default_factory=lambda: np.zeros(6))
    seed: int | None = None

    def __post_init__(self):
        self.modes = [np.asarray(m, dtype=float).reshape(-1, 3) for m in self.modes]
        if len(self.modes) != 6:
            raise ValueError("need mode tables for six axes")
        self.offset = np.asarray(self.offset, dtype=float).reshape(6)
        for j in (3, 4):
            if np.sum(np.abs(self.modes[j][:, 1])) > 0.5 + 1e-12:
                raise ValueError(f"b{j + 1} amplitudes exceed the 0.5 rad envelope")

    def axis(self, j: int, t) -> np.ndarray:
        """Axis ``b{j}`` (1-based) at time(s) ``t``."""
        t = np.asarray(t, dtype=float)
        m = self.modes[j - 1]
        out = np.full(t.shape, self.offset[j - 1])
        if len(m):
            out = out + np.sum(m[:, 1] * np.sin(2 * np.pi * m[:, 0] * t[..., None] + m[:, 2]), axis=-1)
        return out

    def tilt(self, t) -> np.ndarray:
        return np.hypot(self.axis(4, t), self.axis(5, t))


def deck_pose(spec: WaveSpec, t: float) -> np.ndarray:
    return np.array([spec.axis(j, t) for j in range(1, 7)], dtype=float)


@dataclass(frozen=True)
class SensorSpec:
    rate: float = 30.0
    jitter: float = 0.2
    noise_pos: float = 0.02
    noise_ang: float = 0.01
    dropout: float = 0.02

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError("sensor rate must be positive")
        if not 0 <= self.jitter < 0.5:
            raise ValueError("jitter must lie in [0, 0.5)")
        if not 0 <= self.dropout <= 1:
            raise ValueError("dropout must be a probability")

    @property
    def noise(self) -> np.ndarray:
        return np.array([self.noise_pos] * 3 + [self.noise_ang] * 3)


VISION = SensorSpec()
IMU = SensorSpec(rate=100.0, jitter=0.0, noise_pos=0.005, noise_ang=0.002, dropout=0.0)


def sample_sensor(spec: SensorSpec, wave: WaveSpec, t_req: float, rng: np.random.Generator) -> PoseSample | None:
    """One pose observation requested at ``t_req``.

    The generator is advanced by the same amount whether or not the frame
    drops, so the random stream does not depend on earlier outcomes.
    """
    u = rng.random(2)
    noise = rng.standard_normal(6) * spec.noise
    if u[1] < spec.dropout:
        return None
    t = t_req + (2.0 * u[0] - 1.0) * spec.jitter / spec.rate
    b = deck_pose(wave, t) + noise
    b[3:5] = np.clip(b[3:5], -math.pi / 2, math.pi / 2)
    return PoseSample(float(t), b)


@dataclass(frozen=True)
class PlantSpec:
    tau: float = 0.25
    wind: tuple = (0.0, 0.0, 0.0)
    max_speed: float = 8.0

    def __post_init__(self):
        if not self.tau >= 0:
            raise ValueError("time constant must be non-negative")


def plant_step(spec: PlantSpec, uav: np.ndarray, vref: np.ndarray, dt: float, rng=None) -> np.ndarray:
    """First-order velocity tracking with a constant wind drift, integrated exactly.

    ``uav`` is a 12-state; the acceleration slots hold the rate of change of
    the tracked (air-relative) velocity. ``rng`` is unused and kept for
    signature symmetry with the other stochastic models.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    s = np.asarray(uav, dtype=float)
    out = s.copy()
    wind = np.zeros(4)
    wind[:3] = spec.wind
    r = np.clip(np.asarray(vref, dtype=float), -spec.max_speed, spec.max_speed)
    v_air = s[VEL] - wind
    if spec.tau > 0:
        decay = math.exp(-dt / spec.tau)
        gain = spec.tau * (1.0 - decay)
    else:
        decay, gain = 0.0, 0.0
    v_new = r + (v_air - r) * decay
    out[POS] = s[POS] + (r + wind) * dt + (v_air - r) * gain
    out[VEL] = v_new + wind
    out[ACC] = (r - v_new) / spec.tau if spec.tau > 0 else 0.0
    return out


def _rotation(b4: float, b5: float, b6: float) -> np.ndarray:
    cr, sr = math.cos(b4), math.sin(b4)
    cp, sp = math.cos(b5), math.sin(b5)
    cy, sy = math.cos(b6), math.sin(b6)
    Rx = np.array([[1, 0, 0], [0, cr, -sr], [0, sr, cr]])
    Ry = np.array([[cp, 0, sp], [0, 1, 0], [-sp, 0, cp]])
    Rz = np.array([[cy, -sy, 0], [sy, cy, 0], [0, 0, 1]])
    return Rz @ Ry @ Rx


def deck_height_at(wave: WaveSpec, t: float, x: float, y: float) -> float:
    """Height of the tilted deck plane under ``(x, y)``; the pad sits at the pivot."""
    b = deck_pose(wave, t)
    n = _rotation(b[3], b[4], b[5])[:, 2]
    return float(b[2] - (n[0] * (x - b[0]) + n[1] * (y - b[1])) / n[2])


@dataclass(frozen=True)
class ContactReport:
    t: float
    tilt: float
    rel_vz: float
    lateral_offset: float
    on_pad: bool


def check_touchdown(uav: np.ndarray, wave: WaveSpec, t: float, pad_halfwidth: float = 1.0) -> ContactReport | None:
    """Contact report once the UAV is at or below the deck plane."""
    s = np.asarray(uav, dtype=float)
    x, y, z = s[POS[0]], s[POS[1]], s[POS[2]]
    h = z - deck_height_at(wave, t, x, y)
    if h > 0:
        return None
    eps = 1e-4
    deck_vz = (deck_height_at(wave, t + eps, x, y) - deck_height_at(wave, t - eps, x, y)) / (2 * eps)
    b = deck_pose(wave, t)
    lateral = math.hypot(x - b[0], y - b[1])
    return ContactReport(
        t=float(t),
        tilt=float(math.hypot(b[3], b[4])),
        rel_vz=float(s[VEL[2]] - deck_vz),
        lateral_offset=float(lateral),
        on_pad=lateral <= pad_halfwidth,
    )


def initial_uav_state(x: float, y: float, z: float) -> np.ndarray:
    s = np.zeros(STATE_DIM)
    s[POS[0]], s[POS[1]], s[POS[2]] = x, y, z
    return s
