"""Linear Kalman observer over identified deck motion modes, and wave prediction.

Each mode contributes a 2-state harmonic oscillator ``[A sin(Phi), 2 pi f A cos(Phi)]``;
a final 2-state block with zero dynamics carries the offset. One observer
runs per pose axis.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .spectral import Mode, ModeSet, match_modes, wrap_angle

DEFAULT_LAMBDA = 1e-4
DEFAULT_R = 0.01 ** 2
P0_SCALE = 100.0


class ObserverError(RuntimeError):
    """Numerical failure inside the filter (e.g. non-positive innovation variance)."""


def mode_transition(f: float, dT: float) -> np.ndarray:
    """Closed-form ``exp([[0, 1], [-w^2, 0]] dT)`` with ``w = 2 pi f``."""
    w = 2.0 * math.pi * f
    c, s = math.cos(w * dT), math.sin(w * dT)
    return np.array([[c, s / w], [-w * s, c]])


def mode_vector(A: float, f: float, Phi: float) -> np.ndarray:
    return np.array([A * math.sin(Phi), 2.0 * math.pi * A * f * math.cos(Phi)])


def _block_noise(Psi_blk: np.ndarray, lam: float, dT: float) -> np.ndarray:
    QI = lam * np.eye(2)
    return 0.5 * (Psi_blk @ QI @ Psi_blk.T + QI) * dT


@dataclass
class ObserverState:
    axis: int
    v: np.ndarray
    P: np.ndarray
    freqs: np.ndarray
    Psi: np.ndarray
    Cbar: np.ndarray
    Q: np.ndarray
    R: float
    t_last: float
    dT: float
    lam: float

    @property
    def n_modes(self) -> int:
        return len(self.freqs)

    @property
    def offset(self) -> float:
        return float(self.v[-2])

    def output(self) -> float:
        return float(self.Cbar @ self.v)

    def copy(self) -> ObserverState:
        return replace(
            self, v=self.v.copy(), P=self.P.copy(), freqs=self.freqs.copy(),
            Psi=self.Psi.copy(), Cbar=self.Cbar.copy(), Q=self.Q.copy(),
        )


def _assemble(freqs, dT: float, lam: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    n = 2 * (len(freqs) + 1)
    Psi = np.zeros((n, n))
    Q = np.zeros((n, n))
    for i, f in enumerate(freqs):
        blk = mode_transition(f, dT)
        Psi[2 * i:2 * i + 2, 2 * i:2 * i + 2] = blk
        Q[2 * i:2 * i + 2, 2 * i:2 * i + 2] = _block_noise(blk, lam, dT)
    Psi[-2:, -2:] = np.eye(2)
    Q[-2:, -2:] = _block_noise(np.eye(2), lam, dT)
    Cbar = np.tile([1.0, 0.0], len(freqs) + 1)
    return Psi, Cbar, Q


def init_observer(
    modes: ModeSet,
    dT: float,
    lam: float = DEFAULT_LAMBDA,
    R: float = DEFAULT_R,
    t0: float | None = None,
) -> ObserverState:
    """Build an observer from identified modes.

    Args:
        modes: identification result; phases are referenced to ``modes.t_fft``.
        dT: observer sample period.
        lam: process-noise gain.
        R: observation-noise variance.
        t0: time of the initial state (defaults to ``modes.t_fft``); each
            mode's phase is advanced to it.
    """
    if not (dT > 0 and lam > 0 and R > 0):
        raise ValueError("dT, lambda and R must be positive")
    if any(not m.f > 0 for m in modes.modes):
        raise ValueError("mode frequencies must be positive; the offset block handles DC")
    t0 = modes.t_fft if t0 is None else float(t0)
    freqs = modes.freqs
    Psi, Cbar, Q = _assemble(freqs, dT, lam)
    v = np.zeros(len(Cbar))
    for i, m in enumerate(modes.modes):
        v[2 * i:2 * i + 2] = mode_vector(m.A, m.f, m.phi + 2 * math.pi * m.f * (t0 - modes.t_fft))
    v[-2] = modes.offset
    return ObserverState(
        axis=modes.axis, v=v, P=P0_SCALE * Q, freqs=freqs.copy(), Psi=Psi, Cbar=Cbar,
        Q=Q, R=float(R), t_last=t0, dT=float(dT), lam=float(lam),
    )


def kalman_step(state: ObserverState, b_meas: float | None) -> ObserverState:
    """Advance the observer by ``dT`` and fuse one measurement (in place).

    ``b_meas=None`` performs the time update only, which bridges dropouts.
    """
    Psi = state.Psi
    v_hat = Psi @ state.v
    P_hat = Psi @ state.P @ Psi.T + state.Q
    state.t_last += state.dT
    if b_meas is None:
        state.v = v_hat
        state.P = 0.5 * (P_hat + P_hat.T)
        return state
    if not math.isfinite(b_meas):
        raise ValueError("measurement must be finite")
    C = state.Cbar
    b_hat = C @ v_hat
    PCt = P_hat @ C
    S = C @ PCt + state.R
    if not S > 0:
        raise ObserverError(f"innovation variance {S!r} is not positive")
    L = PCt / S
    state.v = v_hat + L * (b_meas - b_hat)
    P = P_hat - np.outer(L, C @ P_hat)
    state.P = 0.5 * (P + P.T)
    return state


def reidentify(state: ObserverState, report: ModeSet, tol: float) -> ObserverState:
    """Merge a fresh identification into a running observer.

    Modes matched in frequency keep their state and covariance untouched,
    vanished modes are removed, and new modes are appended with a fresh
    initial state and covariance (zero cross-covariance).
    """
    if report.axis != state.axis:
        raise ValueError("report and observer refer to different axes")
    old = ModeSet(state.axis, [Mode(f, 1.0, 0.0) for f in state.freqs])
    retained, added, _ = match_modes(old, report, tol)
    keep = [i for i, _ in retained]
    new_freqs = np.concatenate([state.freqs[keep], report.freqs[added]]) if (keep or added) else np.empty(0)
    Psi, Cbar, Q = _assemble(new_freqs, state.dT, state.lam)
    n = len(Cbar)
    v = np.zeros(n)
    P = np.zeros((n, n))
    src = np.concatenate([[2 * i, 2 * i + 1] for i in keep] + [[len(state.v) - 2, len(state.v) - 1]]).astype(int)
    dst = np.concatenate([np.arange(2 * len(keep)), [n - 2, n - 1]]).astype(int)
    v[dst] = state.v[src]
    P[np.ix_(dst, dst)] = state.P[np.ix_(src, src)]
    for r, k in enumerate(added):
        m = report.modes[k]
        i = len(keep) + r
        Phi = m.phi + 2 * math.pi * m.f * (state.t_last - report.t_fft)
        v[2 * i:2 * i + 2] = mode_vector(m.A, m.f, Phi)
        P[2 * i:2 * i + 2, 2 * i:2 * i + 2] = P0_SCALE * Q[2 * i:2 * i + 2, 2 * i:2 * i + 2]
    return replace(state, v=v, P=P, freqs=new_freqs, Psi=Psi, Cbar=Cbar, Q=Q)


def extract_amp_phase(state: ObserverState, mode: int) -> tuple[float, float, bool]:
    """Amplitude and phase of one mode at ``t_last``.

    Returns:
        ``(A, Phi, degenerate)`` with ``A >= 0`` and ``Phi`` in ``(-pi, pi]``.
    """
    if not 0 <= mode < state.n_modes:
        raise IndexError(f"mode {mode} out of range")
    v1, v2 = state.v[2 * mode], state.v[2 * mode + 1]
    if abs(v1) < 1e-12 and abs(v2) < 1e-12:
        return 0.0, 0.0, True
    w = 2 * math.pi * state.freqs[mode]
    Phi = math.atan2(w * v1, v2)
    s = math.sin(Phi)
    A = v1 / s if abs(s) > 1e-6 else v2 / (w * math.cos(Phi))
    if A < 0:
        A, Phi = -A, wrap_angle(Phi + math.pi)
    return A, Phi, False


def amp_phase_arrays(state: ObserverState) -> tuple[np.ndarray, np.ndarray]:
    """Vectorised ``extract_amp_phase`` over all modes."""
    if state.n_modes == 0:
        return np.empty(0), np.empty(0)
    V = state.v[:-2].reshape(-1, 2)
    w = 2 * np.pi * state.freqs
    Phi = np.arctan2(w * V[:, 0], V[:, 1])
    A = np.hypot(V[:, 0], V[:, 1] / w)
    return A, Phi


def predict(state: ObserverState | None, t) -> np.ndarray | float:
    """Forecast the axis value at time(s) ``t >= t_last``."""
    if state is None:
        raise ObserverError("observer is not initialised")
    t = np.asarray(t, dtype=float)
    A, Phi = amp_phase_arrays(state)
    dt = t[..., None] - state.t_last
    out = state.v[-2] + np.sum(A * np.sin(2 * np.pi * state.freqs * dt + Phi), axis=-1)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class WaveForecast:
    t_obs: float
    modes: tuple[tuple[float, float, float], ...]
    offset: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.offset)
        for f, A, Phi in self.modes:
            out = out + A * np.sin(2 * np.pi * f * (t - self.t_obs) + Phi)
        return out


def forecast(state: ObserverState) -> WaveForecast:
    A, Phi = amp_phase_arrays(state)
    return WaveForecast(
        state.t_last,
        tuple((float(f), float(a), float(p)) for f, a, p in zip(state.freqs, A, Phi)),
        state.offset,
    )


def dump_state_csv(path: str | Path, state: ObserverState) -> None:
    """Write mode rows ``f,A,Phi`` followed by an ``offset`` row."""
    fc = forecast(state)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["f", "A", "Phi"])
        for f, A, Phi in fc.modes:
            w.writerow([f, A, Phi])
        w.writerow(["offset", fc.offset, ""])
