"""FFT decomposition of a deck pose window into sinusoidal modes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .pose_stream import SampleWindow

A_GATE = 0.02
ACCURACY_THRESHOLD = 0.8


@dataclass(frozen=True)
class Mode:
    """One sinusoid ``A sin(2 pi f (t - t_ref) + phi)``."""

    f: float
    A: float
    phi: float


@dataclass
class ModeSet:
    axis: int
    modes: list[Mode] = field(default_factory=list)
    offset: float = 0.0
    t_fft: float = 0.0

    @property
    def freqs(self) -> np.ndarray:
        return np.array([m.f for m in self.modes], dtype=float)

    def evaluate(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.offset, dtype=float)
        for m in self.modes:
            out += m.A * np.sin(2 * np.pi * m.f * (t - self.t_fft) + m.phi)
        return out


@dataclass
class IdentReport:
    mode_sets: list[ModeSet]
    accuracy: np.ndarray

    def for_axis(self, axis: int) -> ModeSet:
        return self.mode_sets[axis - 1]


def wrap_angle(a):
    """Wrap to ``(-pi, pi]``."""
    w = np.mod(np.asarray(a, dtype=float) + np.pi, 2 * np.pi) - np.pi
    w = np.where(w == -np.pi, np.pi, w)
    return float(w) if np.ndim(w) == 0 else w


def spectrum(x: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-sided amplitude/phase spectrum of a real signal (rectangular window).

    The phase is that of a sine referenced to the first sample, so a bin
    centred pure tone ``A sin(2 pi f t + phi)`` reads back as ``(A, phi)``.
    Index 0 is the mean.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    X = np.fft.rfft(x)
    freqs = np.fft.rfftfreq(n, dt)
    amp = 2.0 * np.abs(X) / n
    amp[0] = X[0].real / n
    if n % 2 == 0:
        amp[-1] /= 2.0
    phase = wrap_angle(np.angle(X) + np.pi / 2)
    phase[0] = 0.0
    return freqs, amp, phase


def _peak_indices(amp: np.ndarray) -> np.ndarray:
    # Strict local maxima over bins 1..n-1; the DC bin is not a neighbour.
    a = amp[1:]
    if len(a) == 0:
        return np.empty(0, dtype=int)
    left = np.concatenate(([-np.inf], a[:-1]))
    right = np.concatenate((a[1:], [-np.inf]))
    return np.nonzero((a > left) & (a > right))[0] + 1


def identify(window: SampleWindow, axis: int, gate: float = A_GATE) -> ModeSet:
    """Identify the periodic modes of one axis.

    Modes are strict local maxima of the amplitude spectrum no smaller than
    ``gate`` times the largest peak. Phases are referenced to the window start.
    """
    if not 0 < gate < 1:
        raise ValueError("gate must lie in (0, 1)")
    x = window.axis(axis) if window.values.shape[1] > 1 else window.values[:, 0]
    if len(x) < 2:
        raise ValueError("window shorter than two samples")
    freqs, amp, phase = spectrum(x, window.dt)
    offset = float(amp[0])
    peaks = _peak_indices(amp)
    peaks = peaks[amp[peaks] > 1e-12 * max(1.0, abs(offset))]
    modes: list[Mode] = []
    if len(peaks):
        threshold = gate * amp[peaks].max()
        keep = peaks[amp[peaks] >= threshold]
        keep = keep[np.argsort(-amp[keep], kind="stable")]
        modes = [Mode(float(freqs[k]), float(amp[k]), float(phase[k])) for k in keep]
    return ModeSet(axis=axis, modes=modes, offset=offset, t_fft=window.t0)


def identify_all(window: SampleWindow, gate: float = A_GATE, noise_floor: float = 0.0) -> IdentReport:
    sets = [identify(window, j, gate) for j in range(1, 7)]
    acc = np.array([accuracy_score(window, s, noise_floor)[0] for s in sets])
    return IdentReport(sets, acc)


def accuracy_score(window: SampleWindow, modes: ModeSet, noise_floor: float = 0.0) -> tuple[float, bool]:
    """Normalised reconstruction score ``1 - RMSE / RMS(x - mean)`` clamped to [0, 1].

    Args:
        window: the window the modes were identified from.
        modes: identified modes for one axis.
        noise_floor: windows whose standard deviation does not exceed this
            are treated as motionless.

    Returns:
        ``(score, degenerate)``; degenerate windows score 1.0.
    """
    x = window.axis(modes.axis) if window.values.shape[1] > 1 else window.values[:, 0]
    spread = float(np.sqrt(np.mean((x - x.mean()) ** 2)))
    if spread <= max(noise_floor, 1e-15 * max(1.0, abs(float(x.mean())))):
        return 1.0, True
    recon = modes.evaluate(window.times)
    rmse = float(np.sqrt(np.mean((recon - x) ** 2)))
    return float(min(1.0, max(0.0, 1.0 - rmse / spread))), False


def match_modes(old: ModeSet, new: ModeSet, tol: float):
    """Greedy nearest-frequency pairing of two mode sets.

    Returns:
        ``(retained, added, dropped)`` where ``retained`` lists
        ``(old_index, new_index)`` pairs and the other two list indices into
        ``new`` and ``old`` respectively.
    """
    of, nf = old.freqs, new.freqs
    cand = sorted(
        (abs(of[i] - nf[k]), i, k)
        for i in range(len(of))
        for k in range(len(nf))
        if abs(of[i] - nf[k]) <= tol
    )
    used_old: set[int] = set()
    used_new: set[int] = set()
    retained = []
    for _, i, k in cand:
        if i in used_old or k in used_new:
            continue
        used_old.add(i)
        used_new.add(k)
        retained.append((i, k))
    retained.sort()
    added = [k for k in range(len(nf)) if k not in used_new]
    dropped = [i for i in range(len(of)) if i not in used_old]
    return retained, added, dropped


def matching_tolerance(span: float, bins: float = 1.5) -> float:
    return bins / span


def spectrum_rows(window: SampleWindow, axis: int):
    """``(f, amplitude, phase)`` rows for a debug dump."""
    x = window.axis(axis)
    f, a, p = spectrum(x, window.dt)
    return list(zip(f.tolist(), a.tolist(), p.tolist()))


__all__ = [
    "A_GATE", "ACCURACY_THRESHOLD", "Mode", "ModeSet", "IdentReport", "identify",
    "identify_all", "accuracy_score", "match_modes", "matching_tolerance",
    "spectrum", "spectrum_rows", "wrap_angle",
]

