import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from usvland.pose_stream import SampleWindow
from usvland.spectral import (
    Mode, ModeSet, accuracy_score, identify, identify_all, match_modes, matching_tolerance, spectrum, wrap_angle,
)


def window_of(x, rate=30.0, t0=0.0, axis=4):
    vals = np.zeros((len(x), 6))
    vals[:, axis - 1] = x
    return SampleWindow(t0, 1.0 / rate, vals)


def grid(span=20.0, rate=30.0):
    return np.arange(int(span * rate) + 1) / rate


def reference_dft(x, dt):
    """Plain O(n^2) DFT, written independently of numpy.fft."""
    n = len(x)
    k = np.arange(n // 2 + 1)
    tt = np.arange(n)
    X = np.array([np.sum(x * np.exp(-2j * np.pi * kk * tt / n)) for kk in k])
    return k / (n * dt), X


def test_constant_signal():
    ms = identify(window_of(np.full(601, 0.7)), 4)
    assert ms.modes == []
    assert ms.offset == pytest.approx(0.7, abs=1e-12)


def test_two_mode_example_against_reference_dft():
    t = grid()
    x = 0.3 * np.sin(2 * np.pi * 0.2 * t) + 0.1 * np.sin(2 * np.pi * 0.5 * t + 1.0)
    ms = identify(window_of(x), 4, 0.02)
    f_ref, X = reference_dft(x, 1 / 30)
    amp = 2 * np.abs(X) / len(x)
    # Local maxima of the reference spectrum above the gate, largest first.
    pk = [k for k in range(1, len(amp) - 1) if amp[k] > amp[k - 1] and amp[k] > amp[k + 1]]
    pk = [k for k in pk if amp[k] >= 0.02 * max(amp[pk])]
    pk.sort(key=lambda k: -amp[k])
    assert len(ms.modes) == len(pk)
    for m, k in zip(ms.modes, pk):
        assert m.f == pytest.approx(f_ref[k], rel=1e-12)
        assert m.A == pytest.approx(amp[k], rel=1e-9)
    bin_ = 1 / (len(t) / 30.0)
    strong = ms.modes[:2]
    assert abs(strong[0].f - 0.2) <= bin_ and abs(strong[1].f - 0.5) <= bin_
    assert strong[0].A == pytest.approx(0.3, rel=0.05)
    assert strong[1].A == pytest.approx(0.1, rel=0.05)


def test_bin_centred_tone_reads_back_phase():
    t = np.arange(600) / 30.0  # exactly 20 s, bins on 0.05 Hz
    x = 0.25 * np.sin(2 * np.pi * 0.35 * t - 2.0) + 0.4
    ms = identify(window_of(x), 4)
    assert len(ms.modes) == 1
    m = ms.modes[0]
    assert m.f == pytest.approx(0.35)
    assert m.A == pytest.approx(0.25, rel=1e-9)
    assert m.phi == pytest.approx(-2.0, abs=1e-9)
    assert ms.offset == pytest.approx(0.4, abs=1e-12)


def test_gate_discards_small_mode():
    t = np.arange(600) / 30.0
    x = 0.3 * np.sin(2 * np.pi * 0.2 * t) + 0.1 * np.sin(2 * np.pi * 0.5 * t) + 0.004 * np.sin(2 * np.pi * 1.0 * t)
    ms = identify(window_of(x), 4, 0.02)
    assert [round(m.f, 6) for m in ms.modes] == [0.2, 0.5]
    ms_low = identify(window_of(x), 4, 0.01)
    assert len(ms_low.modes) == 3


def test_phases_referenced_to_window_start():
    t0 = 7.3
    t = t0 + np.arange(600) / 30.0
    x = 0.2 * np.sin(2 * np.pi * 0.25 * t + 0.5)
    ms = identify(window_of(x, t0=t0), 4)
    assert ms.t_fft == t0
    np.testing.assert_allclose(ms.evaluate(t), x, atol=1e-9)


def test_short_window_rejected():
    with pytest.raises(ValueError):
        SampleWindow(0.0, 0.1, np.zeros((1, 6)))
    with pytest.raises(ValueError):
        identify(window_of(np.zeros(10)), 4, gate=1.5)


def test_accuracy_exact_modes():
    t = grid()
    x = 0.3 * np.sin(2 * np.pi * 0.2 * t + 0.3)
    ms = ModeSet(4, [Mode(0.2, 0.3, 0.3)], 0.0, 0.0)
    score, degenerate = accuracy_score(window_of(x), ms)
    assert score >= 0.99 and not degenerate


def test_accuracy_empty_modes_is_zero():
    t = grid()
    x = 0.3 * np.sin(2 * np.pi * 0.2 * t)
    ms = ModeSet(4, [], float(x.mean()), 0.0)
    assert accuracy_score(window_of(x), ms)[0] == pytest.approx(0.0, abs=1e-12)


def test_accuracy_degenerate_window():
    score, degenerate = accuracy_score(window_of(np.full(50, 0.2)), ModeSet(4, [], 0.2, 0.0))
    assert score == 1.0 and degenerate


def test_accuracy_noise_monte_carlo():
    # Score of identified modes on A = 10 sigma noisy sinusoids vs 1 - sigma sqrt(2) / A.
    rng = np.random.default_rng(11)
    t = np.arange(600) / 30.0
    A, sigma = 0.2, 0.02
    scores = []
    for _ in range(100):
        x = A * np.sin(2 * np.pi * 0.2 * t + 0.4) + rng.normal(0, sigma, len(t))
        w = window_of(x)
        scores.append(accuracy_score(w, identify(w, 4))[0])
    assert np.mean(scores) == pytest.approx(1 - sigma * math.sqrt(2) / A, abs=0.05)


@settings(max_examples=40, deadline=None)
@given(
    n_modes=st.integers(1, 5),
    seed=st.integers(0, 2 ** 31),
)
def test_recovers_mode_count_when_well_separated(n_modes, seed):
    rng = np.random.default_rng(seed)
    bins = rng.choice(np.arange(2, 40, 4), size=n_modes, replace=False)  # >= 4 bins apart
    f = bins * 0.05
    A = rng.uniform(0.05, 0.3, n_modes)
    phi = rng.uniform(-np.pi, np.pi, n_modes)
    t = np.arange(600) / 30.0
    x = np.sum(A * np.sin(2 * np.pi * f * t[:, None] + phi), axis=1)
    ms = identify(window_of(x), 4)
    assert len(ms.modes) == n_modes
    np.testing.assert_allclose(np.sort(ms.freqs), np.sort(f), atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), gate=st.floats(0.005, 0.5))
def test_gate_invariant(seed, gate):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=300).cumsum() * 0.01
    x = np.clip(x, -1.5, 1.5)
    ms = identify(window_of(x), 4, gate)
    if ms.modes:
        amps = np.array([m.A for m in ms.modes])
        assert np.all(amps >= gate * amps.max() - 1e-15)
        assert np.all(np.diff(amps) <= 0)
        assert all(m.f > 0 and -np.pi < m.phi <= np.pi for m in ms.modes)
        assert len(set(ms.freqs)) == len(ms.modes)


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 31), c=st.floats(-1.0, 1.0))
def test_accuracy_offset_invariant(seed, c):
    rng = np.random.default_rng(seed)
    t = np.arange(400) / 30.0
    x = 0.2 * np.sin(2 * np.pi * 0.3 * t + rng.uniform(-3, 3)) + rng.normal(0, 0.02, len(t))
    a = accuracy_score(window_of(x), identify(window_of(x), 4))[0]
    b = accuracy_score(window_of(x + c), identify(window_of(x + c), 4))[0]
    assert a == pytest.approx(b, abs=1e-9)


def test_match_modes_examples():
    def ms(*fs):
        return ModeSet(4, [Mode(f, 1.0, 0.0) for f in fs])

    assert match_modes(ms(0.20), ms(0.21), 0.075) == ([(0, 0)], [], [])
    assert match_modes(ms(), ms(0.5), 0.075) == ([], [0], [])
    retained, added, dropped = match_modes(ms(0.2, 0.5), ms(0.2, 0.9), 0.075)
    assert retained == [(0, 0)] and added == [1] and dropped == [1]
    assert matching_tolerance(20.0) == pytest.approx(0.075)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(0.01, 2.0), max_size=6, unique=True),
    st.lists(st.floats(0.01, 2.0), max_size=6, unique=True),
    st.floats(0.0, 0.5),
)
def test_match_modes_conserves(old_f, new_f, tol):
    old = ModeSet(4, [Mode(f, 1.0, 0.0) for f in old_f])
    new = ModeSet(4, [Mode(f, 1.0, 0.0) for f in new_f])
    retained, added, dropped = match_modes(old, new, tol)
    assert len(retained) + len(added) == len(new_f)
    assert len(retained) + len(dropped) == len(old_f)
    assert all(abs(old_f[i] - new_f[k]) <= tol for i, k in retained)


def test_wrap_angle_range():
    a = np.linspace(-20, 20, 1001)
    w = wrap_angle(a)
    assert np.all(w > -np.pi) and np.all(w <= np.pi)
    np.testing.assert_allclose(np.sin(w), np.sin(a), atol=1e-12)
    assert wrap_angle(-np.pi) == np.pi


def test_spectrum_dc_and_identify_all():
    t = np.arange(600) / 30.0
    vals = np.zeros((600, 6))
    vals[:, 3] = 0.1 * np.sin(2 * np.pi * 0.2 * t)
    vals[:, 4] = 0.05 * np.sin(2 * np.pi * 0.4 * t) + 0.01
    w = SampleWindow(0.0, 1 / 30, vals)
    f, amp, _ = spectrum(vals[:, 4], 1 / 30)
    assert amp[0] == pytest.approx(0.01)
    rep = identify_all(w)
    assert len(rep.mode_sets) == 6
    assert rep.for_axis(5).modes[0].f == pytest.approx(0.4)
    assert rep.accuracy[3] > 0.99 and rep.accuracy[0] == 1.0
