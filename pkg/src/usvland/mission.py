"""Finite-state mission automaton that drives the setpoint of the landing MPC."""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum

import numpy as np

from .mpc import activation_check
from .uav_model import POS, STATE_DIM


class Phase(str, Enum):
    ASCEND_SEARCH = "ASCEND_SEARCH"
    HOVER_ALIGN = "HOVER_ALIGN"
    COLLECT = "COLLECT"
    LAND = "LAND"
    TOUCHDOWN = "TOUCHDOWN"


@dataclass(frozen=True)
class MissionParams:
    hover_alt: float = 2.0
    ceiling: float = 15.0
    climb_margin: float = 1.0
    align_radius: float = 0.5
    lost_timeout: float = 0.5
    sink_depth: float = 0.3
    acc_threshold: float = 0.8
    pos_threshold: float = 0.1
    vel_threshold: float = 0.1


@dataclass(frozen=True)
class MissionState:
    phase: Phase = Phase.ASCEND_SEARCH
    t_phase: float = 0.0
    lost_since: float | None = None
    pad: tuple | None = None  # last pad estimate (x, y, z)
    heading: float = 0.0
    aborted: bool = False
    land_entries: int = 0


@dataclass(frozen=True)
class Observations:
    t: float
    uav: np.ndarray
    pad_visible: bool
    pad: tuple | None = None
    fft_accuracy: float = 0.0
    contact: bool = False
    land_permitted: bool = True


@dataclass(frozen=True)
class Command:
    xstar: np.ndarray | None
    land_active: bool = False
    z_ref: float = 0.0


def _setpoint(x, y, z, eta=0.0) -> np.ndarray:
    s = np.zeros(STATE_DIM)
    s[POS] = (x, y, z, eta)
    return s


def automaton_step(m: MissionState, o: Observations, p: MissionParams = MissionParams()):
    """Advance the mission by one control cycle.

    Returns:
        ``(mission, command)``; ``command.xstar`` is None once the vehicle has
        touched down or the episode was aborted, meaning zero output.
    """
    if m.phase is Phase.TOUCHDOWN or m.aborted:
        return m, Command(None)
    if o.contact and m.phase is Phase.LAND:
        return replace(m, phase=Phase.TOUCHDOWN, t_phase=o.t), Command(None)

    pad = o.pad if (o.pad_visible and o.pad is not None) else m.pad
    if o.pad_visible:
        m = replace(m, lost_since=None, pad=pad)
    elif m.lost_since is None:
        m = replace(m, lost_since=o.t)
    lost_for = 0.0 if m.lost_since is None else o.t - m.lost_since
    uav = o.uav

    if m.phase is Phase.ASCEND_SEARCH:
        if o.pad_visible and pad is not None:
            m = replace(m, phase=Phase.HOVER_ALIGN, t_phase=o.t, heading=float(uav[POS[3]]))
        elif uav[POS[2]] >= p.ceiling:
            return replace(m, aborted=True), Command(None)
        else:
            top = min(uav[POS[2]] + p.climb_margin, p.ceiling + 0.5)
            return m, Command(_setpoint(uav[POS[0]], uav[POS[1]], top, uav[POS[3]]))

    hover = _setpoint(pad[0], pad[1], pad[2] + p.hover_alt, m.heading)

    if m.phase is Phase.HOVER_ALIGN:
        err = np.hypot(uav[POS[0]] - pad[0], uav[POS[1]] - pad[1])
        if o.pad_visible and err <= p.align_radius:
            m = replace(m, phase=Phase.COLLECT, t_phase=o.t)
        return m, Command(hover)

    if m.phase is Phase.COLLECT:
        if (
            o.land_permitted
            and o.pad_visible
            and activation_check(uav, hover, o.fft_accuracy, p.acc_threshold, p.pos_threshold, p.vel_threshold)
        ):
            m = replace(m, phase=Phase.LAND, t_phase=o.t, land_entries=m.land_entries + 1)
        else:
            return m, Command(hover)

    # LAND: aim below the pad so the plan reaches contact with a finite sink rate.
    if lost_for > p.lost_timeout:
        return replace(m, phase=Phase.HOVER_ALIGN, t_phase=o.t), Command(hover)
    target = _setpoint(pad[0], pad[1], pad[2] - p.sink_depth, m.heading)
    return m, Command(target, land_active=True, z_ref=float(target[POS[2]]))


__all__ = ["Phase", "MissionParams", "MissionState", "Observations", "Command", "automaton_step"]
