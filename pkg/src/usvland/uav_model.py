"""Triple-integrator prediction model of the UAV with jerk input.

State ordering is fixed as ``(x, vx, ax, y, vy, ay, z, vz, az, eta, eta_d, eta_dd)``
and the input is the jerk ``(jx, jy, jz, j_eta)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STATE_DIM = 12
INPUT_DIM = 4
AXES = ("x", "y", "z", "eta")
STATE_NAMES = (
    "x", "vx", "ax",
    "y", "vy", "ay",
    "z", "vz", "az",
    "eta", "eta_d", "eta_dd",
)

# Index helpers into the 12-vector.
POS = np.array([0, 3, 6, 9])
VEL = POS + 1
ACC = POS + 2

DEFAULT_DT_PRED = 0.01
U_MAX = np.array([20.0, 20.0, 20.0, 10.0])


@dataclass(frozen=True)
class ModelMatrices:
    D: np.ndarray
    E: np.ndarray
    dt_pred: float

    @property
    def D_block(self) -> np.ndarray:
        return self.D[:3, :3]

    @property
    def E_block(self) -> np.ndarray:
        return self.E[:3, :1]


def taylor_blocks(dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Per-axis state and input blocks of the jerk-driven chain."""
    Dp = np.array([
        [1.0, dt, dt * dt / 2.0],
        [0.0, 1.0, dt],
        [0.0, 0.0, 1.0],
    ])
    Ep = np.array([[dt ** 3 / 6.0], [dt * dt / 2.0], [dt]])
    return Dp, Ep


def build_matrices(dt_pred: float = DEFAULT_DT_PRED) -> ModelMatrices:
    """Build ``D = I4 (x) D'`` and ``E = I4 (x) E'`` for step ``dt_pred``."""
    if not dt_pred > 0:
        raise ValueError(f"dt_pred must be positive, got {dt_pred}")
    Dp, Ep = taylor_blocks(dt_pred)
    eye = np.eye(INPUT_DIM)
    return ModelMatrices(D=np.kron(eye, Dp), E=np.kron(eye, Ep), dt_pred=float(dt_pred))


def step(m: ModelMatrices, s: np.ndarray, u: np.ndarray) -> np.ndarray:
    return m.D @ np.asarray(s, dtype=float) + m.E @ np.asarray(u, dtype=float)


def rollout(m: ModelMatrices, s0: np.ndarray, u_seq: np.ndarray, Mp: int, Mc: int) -> np.ndarray:
    """Propagate ``Mp`` steps; inputs after step ``Mc`` stay frozen at the last one.

    Args:
        m: model matrices.
        s0: initial 12-state.
        u_seq: array of shape ``(Mc, 4)``.
        Mp: prediction horizon.
        Mc: control horizon.

    Returns:
        Array of shape ``(Mp, 12)`` holding states 1..Mp.
    """
    u_seq = np.asarray(u_seq, dtype=float)
    if u_seq.ndim != 2 or u_seq.shape != (Mc, INPUT_DIM):
        raise ValueError(f"u_seq must have shape ({Mc}, {INPUT_DIM}), got {u_seq.shape}")
    if not 1 <= Mc <= Mp:
        raise ValueError(f"need 1 <= Mc <= Mp, got Mc={Mc}, Mp={Mp}")
    out = np.empty((Mp, STATE_DIM))
    s = np.asarray(s0, dtype=float)
    for k in range(Mp):
        s = m.D @ s + m.E @ u_seq[min(k, Mc - 1)]
        out[k] = s
    return out


def prediction_matrices(dt: float, Mp: int, Mc: int) -> tuple[np.ndarray, np.ndarray]:
    """Lifted single-axis prediction ``S = Phi s0 + Gamma u`` over the horizon.

    Returns ``Phi`` of shape ``(Mp, 3, 3)`` and ``Gamma`` of shape ``(Mp, 3, Mc)``,
    where row ``m`` maps to state ``m + 1`` and the input is held at ``u[Mc-1]``
    after the control horizon.
    """
    Dp, Ep = taylor_blocks(dt)
    Phi = np.empty((Mp, 3, 3))
    Gamma = np.zeros((Mp, 3, Mc))
    A = np.eye(3)
    G = np.zeros((3, Mc))
    for k in range(Mp):
        A = Dp @ A
        G = Dp @ G
        G[:, min(k, Mc - 1)] += Ep[:, 0]
        Phi[k] = A
        Gamma[k] = G
    return Phi, Gamma
