"""Online deck-motion estimator: pose buffer, periodic identification, mode observers."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import observer as obs
from .pose_stream import NotReady, PoseBuffer, PoseSample, resample_window
from .spectral import A_GATE, ACCURACY_THRESHOLD, ModeSet, accuracy_score, identify, matching_tolerance


@dataclass
class EstimatorConfig:
    rate: float = 30.0
    span: float = 20.0
    retention: float = 25.0
    fft_period: float = 5.0
    gate: float = A_GATE
    lam: float = obs.DEFAULT_LAMBDA
    R: float = obs.DEFAULT_R
    axes: tuple = (4, 5)
    calm_rms: float = 0.03
    max_gap: float = 0.5
    accuracy_threshold: float = ACCURACY_THRESHOLD


class DeckEstimator:
    """Turns a stream of deck poses into tilt forecasts.

    Identification runs every ``fft_period`` seconds over the latest ``span``
    seconds once the buffer covers them. The first identification of an axis
    seeds its observer at the window start and replays the window; later ones
    only merge added and dropped modes. Between identifications the observers
    advance on a uniform ``1 / rate`` grid, fed by linear interpolation
    between consecutive samples.
    """

    def __init__(self, cfg: EstimatorConfig | None = None):
        self.cfg = cfg = cfg or EstimatorConfig()
        self.buffer = PoseBuffer(cfg.retention, cfg.max_gap)
        self.observers: dict[int, obs.ObserverState] = {}
        self.mode_sets: dict[int, ModeSet] = {}
        self.accuracy: float = 0.0
        self.latched_at: float | None = None
        self.next_fft: float | None = None
        self.n_identifications = 0
        self._prev: PoseSample | None = None

    @property
    def dT(self) -> float:
        return 1.0 / self.cfg.rate

    @property
    def ready(self) -> bool:
        return bool(self.observers)

    def push(self, sample: PoseSample) -> None:
        self.buffer.push(sample)
        prev, self._prev = self._prev, sample
        if prev is None:
            return
        for j, st in self.observers.items():
            self._advance(st, prev, sample, j)
        if self.next_fft is None:
            self.next_fft = sample.t
        if sample.t >= self.next_fft:
            try:
                self._identify(sample.t)
            except NotReady:
                pass
            else:
                self.next_fft = sample.t + self.cfg.fft_period

    def _advance(self, st: obs.ObserverState, prev: PoseSample, cur: PoseSample, j: int) -> None:
        gap = cur.t - prev.t > self.cfg.max_gap
        while st.t_last + self.dT <= cur.t + 1e-12:
            g = st.t_last + self.dT
            if gap or g < prev.t:
                obs.kalman_step(st, None)
            else:
                w = (g - prev.t) / (cur.t - prev.t)
                obs.kalman_step(st, (1 - w) * prev.b[j - 1] + w * cur.b[j - 1])

    def _identify(self, t_now: float) -> None:
        cfg = self.cfg
        window = resample_window(self.buffer, cfg.span, cfg.rate)
        tol = matching_tolerance(cfg.span)
        scores = []
        for j in cfg.axes:
            ms = identify(window, j, cfg.gate)
            score, _ = accuracy_score(window, ms, cfg.calm_rms)
            scores.append(score)
            self.mode_sets[j] = ms
            if j in self.observers:
                self.observers[j] = obs.reidentify(self.observers[j], ms, tol)
            else:
                st = obs.init_observer(ms, window.dt, cfg.lam, cfg.R)
                for value in window.axis(j)[1:]:
                    obs.kalman_step(st, float(value))
                self.observers[j] = st
        self.n_identifications += 1
        self.accuracy = float(min(scores)) if scores else 1.0
        if self.latched_at is None and self.accuracy >= cfg.accuracy_threshold:
            self.latched_at = t_now

    @property
    def latched(self) -> bool:
        return self.latched_at is not None

    def forecast(self, j: int, t) -> np.ndarray:
        st = self.observers.get(j)
        if st is None:
            raise obs.ObserverError(f"no observer for axis b{j}")
        t = np.maximum(np.asarray(t, dtype=float), st.t_last)
        return obs.predict(st, t)

    def pad_estimate(self, average: float = 0.5) -> np.ndarray | None:
        """Mean ``(b1, b2, b3)`` over the last ``average`` seconds."""
        t, b = self.buffer.arrays()
        if not len(t):
            return None
        sel = t >= t[-1] - average
        return b[sel, :3].mean(axis=0)


def ground_truth_forecast(wave, j: int, t) -> np.ndarray:
    return wave.axis(j, t)


__all__ = ["EstimatorConfig", "DeckEstimator", "ground_truth_forecast"]
