"""Scenario fixtures and their JSON representation.

A scenario bundles a deck-motion template, sensor and plant models and the
episode/controller settings. Per-episode randomisation shifts the whole wave
in time (which preserves its landing windows) and perturbs the phases of the
minor modes.
"""

from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .sea_sim import IMU, VISION, PlantSpec, SensorSpec, WaveSpec

AXIS_KEYS = ("b1", "b2", "b3", "b4", "b5", "b6")


@dataclass
class Scenario:
    name: str
    modes: dict = field(default_factory=dict)  # axis key -> [[f, A, phi], ...]
    offset: dict = field(default_factory=dict)  # axis key -> value
    time_shift: float = 100.0
    phase_jitter: float = 0.0
    vision: SensorSpec = VISION
    imu: SensorSpec = IMU
    plant: PlantSpec = PlantSpec()
    timeout: float = 180.0
    start_offset: tuple = (3.0, 5.0)
    start_height: float = 1.5
    deck_halfwidth: float = 1.5
    pad_halfwidth: float = 1.0
    camera_half_fov: float = 0.7
    baseline_delay: tuple = (0.0, 100.0)
    baseline_descent: float = 1.0
    mission: dict = field(default_factory=dict)
    mpc: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)

    def template(self) -> WaveSpec:
        return WaveSpec(
            modes=[np.asarray(self.modes.get(k, []), dtype=float).reshape(-1, 3) for k in AXIS_KEYS],
            offset=[float(self.offset.get(k, 0.0)) for k in AXIS_KEYS],
        )

    def realize(self, seed: int | None) -> WaveSpec:
        """Deck motion for one episode."""
        base = self.template()
        if seed is None:
            return base
        rng = np.random.default_rng([int(seed), 7])
        shift = rng.uniform(0.0, self.time_shift)
        modes = []
        for m in base.modes:
            m = m.copy()
            if len(m):
                m[:, 2] += 2 * np.pi * m[:, 0] * shift
                jitter = rng.uniform(-self.phase_jitter, self.phase_jitter, len(m))
                jitter[np.argmax(m[:, 1])] = 0.0
                m[:, 2] = np.mod(m[:, 2] + jitter + np.pi, 2 * np.pi) - np.pi
            modes.append(m)
        return WaveSpec(modes=modes, offset=base.offset, seed=int(seed))

    # -- serialisation ---------------------------------------------------
    def to_dict(self) -> dict:
        d = {}
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (SensorSpec, PlantSpec)):
                v = asdict(v)
            d[f.name] = copy.deepcopy(v)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> Scenario:
        d = dict(d)
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario keys: {sorted(unknown)}")
        if "name" not in d:
            raise ValueError("scenario needs a name")
        for key in ("modes", "offset"):
            bad = set(d.get(key, {})) - set(AXIS_KEYS)
            if bad:
                raise ValueError(f"unknown axes in {key}: {sorted(bad)}")
        if "vision" in d:
            d["vision"] = SensorSpec(**d["vision"])
        if "imu" in d:
            d["imu"] = SensorSpec(**d["imu"])
        if "plant" in d:
            p = dict(d["plant"])
            if "wind" in p:
                p["wind"] = tuple(p["wind"])
            d["plant"] = PlantSpec(**p)
        for key in ("start_offset", "baseline_delay"):
            if key in d:
                d[key] = tuple(d[key])
        sc = cls(**d)
        sc.template()  # validates the envelope
        return sc


def load_scenario(spec: str | Path | dict) -> Scenario:
    """Scenario from a fixture name, a JSON file path, or a dict."""
    if isinstance(spec, dict):
        return Scenario.from_dict(spec)
    s = str(spec)
    if s in FIXTURES:
        return Scenario.from_dict(FIXTURES[s])
    path = Path(s)
    if not path.exists():
        raise ValueError(f"no scenario fixture or file named {s!r}")
    with open(path) as fh:
        return Scenario.from_dict(json.load(fh))


def save_scenario(sc: Scenario, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(sc.to_dict(), fh, indent=2)


# Frequencies sit on the 0.05 Hz grid of a 20 s identification window.
FIXTURES: dict[str, dict] = {
    "flat": {
        "name": "flat",
        "modes": {},
        "offset": {"b3": 0.0},
    },
    "calm": {
        "name": "calm",
        "modes": {
            "b4": [[0.15, 0.06, 0.0], [0.3, 0.02, 1.0]],
            "b5": [[0.2, 0.05, 0.4], [0.35, 0.015, 2.0]],
        },
        "phase_jitter": 1.0,
    },
    "moderate": {
        "name": "moderate",
        "modes": {
            "b4": [[0.1, 0.15, 0.0], [0.25, 0.07, 1.0], [0.4, 0.04, 2.0]],
            "b5": [[0.15, 0.12, 0.5], [0.3, 0.05, 1.2], [0.45, 0.03, 0.3]],
        },
        "phase_jitter": 3.14159,
    },
    "harsh": {
        "name": "harsh",
        "modes": {
            "b4": [[0.1, 0.38, 0.0], [0.2, 0.05, 1.0], [0.3, 0.04, 2.0], [0.4, 0.03, 0.5]],
            "b5": [[0.2, 0.36, 0.0], [0.1, 0.06, 0.3], [0.3, 0.04, 1.5], [0.45, 0.03, 2.5], [0.15, 0.01, 0.0]],
        },
        "phase_jitter": 0.3,
    },
    "realworld-like": {
        "name": "realworld-like",
        "modes": {
            "b4": [[0.2, 0.3, 0.0]],
            "b5": [[0.35, 0.02, 0.0]],
        },
        "plant": {"tau": 0.25, "wind": [0.3, -0.2, 0.0], "max_speed": 8.0},
        # One dominant mode leaves regular level windows; a softer height weight
        # and deeper setpoint let the plan wait for them.
        "mission": {"sink_depth": 0.45},
        "mpc": {"S": [100, 10, 1, 100, 10, 1, 40, 10, 1, 100, 10, 1]},
    },
}
