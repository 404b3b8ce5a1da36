"""Landing MPC: quadratic tracking cost plus the sigmoid tilt barrier.

The decision variable is the jerk sequence ``U`` of shape ``(Mc, 4)``. Because
the prediction model is four identical decoupled chains, the horizon states of
all axes come from one lifted matrix product, which keeps objective and
gradient evaluations cheap enough for a 20 Hz loop in numpy.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .uav_model import ACC, POS, STATE_DIM, U_MAX, VEL, build_matrices, prediction_matrices

BRANCH_POINT = 0.16


def sigmoid_gate(z_tilde, h_d: float = 1.1):
    """Piecewise sigmoid weighting the tilt penalty by height above the pad.

    Near 1 inside the band between roughly 0.1 m and ``h_d``, 0.5 at both
    edges, and vanishing above the waiting region and at touchdown.
    """
    z = np.asarray(z_tilde, dtype=float)
    upper = 1.0 / (1.0 + np.exp(-(z - h_d) / -0.15))
    lower = 1.0 / (1.0 + np.exp((z - 0.1) / -0.01))
    out = np.where(z >= BRANCH_POINT, upper, lower)
    return float(out) if out.ndim == 0 else out


def sigmoid_gate_grad(z_tilde, h_d: float = 1.1):
    """Derivative of :func:`sigmoid_gate` with respect to ``z_tilde``."""
    z = np.asarray(z_tilde, dtype=float)
    f = sigmoid_gate(z, h_d)
    slope = np.where(z >= BRANCH_POINT, -1.0 / 0.15, 1.0 / 0.01)
    return f * (1.0 - f) * slope


def landing_cost(z_tilde, b4, b5, h_d: float = 1.1):
    return sigmoid_gate(z_tilde, h_d) * (np.asarray(b4) ** 2 + np.asarray(b5) ** 2)


@dataclass
class MpcConfig:
    Mp: int = 100
    Mc: int = 40
    dt_pred: float = 0.01
    S: np.ndarray = field(default_factory=lambda: np.array([100, 10, 1, 100, 10, 1, 60, 10, 1, 100, 10, 1.0]))
    T: np.ndarray = field(default_factory=lambda: np.full(4, 0.1))
    alpha_L: float = 1200.0
    h_d: float = 1.1
    v_max: float = 4.0
    a_max: float = 3.0
    w_soft: float = 1e4
    u_max: np.ndarray = field(default_factory=lambda: U_MAX.copy())
    max_iter: int = 30
    budget_ms: float | None = None

    def __post_init__(self):
        self.S = np.asarray(self.S, dtype=float).reshape(STATE_DIM)
        self.T = np.asarray(self.T, dtype=float).reshape(4)
        self.u_max = np.asarray(self.u_max, dtype=float).reshape(4)
        if not self.Mp >= self.Mc >= 1:
            raise ValueError("need Mp >= Mc >= 1")
        if np.any(self.S < 0) or np.any(self.T < 0):
            raise ValueError("penalty weights must be non-negative")
        if not self.alpha_L > 0:
            raise ValueError("alpha_L must be positive")
        if not self.h_d > BRANCH_POINT:
            raise ValueError("h_d must exceed the sigmoid branch point")
        if not self.max_iter >= 1:
            raise ValueError("iteration budget must be positive")


@dataclass
class LandingContext:
    """Per-cycle inputs of the objective.

    Attributes:
        xstar: desired state, shape ``(12,)`` or ``(Mp, 12)``.
        tilt_b4, tilt_b5: pitch/roll forecasts at horizon steps 1..Mp.
        z_ref: height the barrier measures from (the landing setpoint), so
            the gate sees ``z - z_ref``.
        land_active: whether the barrier term is on.
        u_prev: previously applied jerk, ``u_0`` of the rate penalty.
    """

    xstar: np.ndarray
    tilt_b4: np.ndarray | None = None
    tilt_b5: np.ndarray | None = None
    z_ref: float = 0.0
    land_active: bool = False
    u_prev: np.ndarray = field(default_factory=lambda: np.zeros(4))


@dataclass
class MpcSolution:
    u_seq: np.ndarray
    states: np.ndarray
    J: float
    J_warm: float
    vref: np.ndarray
    iterations: int
    budget_limited: bool


class ObjectiveError(FloatingPointError):
    pass


class LandingMPC:
    """Objective, gradient and box-constrained solver for one vehicle."""

    def __init__(self, cfg: MpcConfig | None = None):
        self.cfg = cfg = cfg or MpcConfig()
        self.model = build_matrices(cfg.dt_pred)
        Phi, Gamma = prediction_matrices(cfg.dt_pred, cfg.Mp, cfg.Mc)
        # Flattened (Mp*3, .) so all four axes share one product.
        self.Phi = Phi.reshape(cfg.Mp * 3, 3)
        self.Gamma = Gamma.reshape(cfg.Mp * 3, cfg.Mc)
        self.Sw = cfg.S.reshape(4, 3).T  # (3, 4): derivative order x axis
        Dm = np.eye(cfg.Mc) - np.eye(cfg.Mc, k=-1)
        self._DtD = Dm.T @ Dm
        self._base_curv = np.tile(2.0 * self.Sw, (cfg.Mp, 1))
        self._H = np.stack([self._hessian(a, self._base_curv[:, a]) for a in range(4)])
        self._Hinv = np.linalg.inv(self._H)

    # -- helpers -------------------------------------------------------
    def _reference(self, xstar: np.ndarray) -> np.ndarray:
        xs = np.asarray(xstar, dtype=float)
        if xs.ndim == 1:
            return xs.reshape(4, 3).T[None, :, :]
        if xs.shape != (self.cfg.Mp, STATE_DIM):
            raise ValueError("trajectory reference must have shape (Mp, 12)")
        return xs.reshape(-1, 4, 3).transpose(0, 2, 1)

    def _tilt2(self, ctx: LandingContext) -> np.ndarray | None:
        if not ctx.land_active or ctx.tilt_b4 is None:
            return None
        b4 = np.asarray(ctx.tilt_b4, dtype=float)
        b5 = np.zeros_like(b4) if ctx.tilt_b5 is None else np.asarray(ctx.tilt_b5, dtype=float)
        if b4.shape != (self.cfg.Mp,) or b5.shape != (self.cfg.Mp,):
            raise ValueError("tilt forecasts must have length Mp")
        return b4 ** 2 + b5 ** 2

    def horizon_states(self, x0: np.ndarray, U: np.ndarray) -> np.ndarray:
        """States 1..Mp as an ``(Mp, 12)`` array."""
        X = self._lifted(x0, U)
        return X.transpose(0, 2, 1).reshape(self.cfg.Mp, STATE_DIM)

    def _lifted(self, x0, U) -> np.ndarray:
        X0 = np.asarray(x0, dtype=float).reshape(4, 3).T
        return (self.Phi @ X0 + self.Gamma @ U).reshape(self.cfg.Mp, 3, 4)

    # -- objective -----------------------------------------------------
    def objective(self, ctx: LandingContext, x0, U, grad: bool = True, _cache=None, _curv=False):
        """Cost ``J`` and optionally its gradient with respect to ``U``."""
        cfg = self.cfg
        U = np.asarray(U, dtype=float)
        if U.shape != (cfg.Mc, 4):
            raise ValueError(f"U must have shape ({cfg.Mc}, 4)")
        ref = self._reference(ctx.xstar) if _cache is None else _cache[0]
        tilt2 = self._tilt2(ctx) if _cache is None else _cache[1]
        X = self._lifted(x0, U)
        err = X - ref
        wErr = self.Sw * err
        J = float(np.sum(wErr * err))
        dX = 2.0 * wErr
        if _curv:
            curv = np.broadcast_to(2.0 * self.Sw, X.shape).copy()

        Uprev = np.vstack([np.asarray(ctx.u_prev, dtype=float)[None, :], U[:-1]])
        h = U - Uprev
        J += float(np.sum(cfg.T * h * h))

        # soft bounds on translational velocity and acceleration
        for k, lim in ((1, cfg.v_max), (2, cfg.a_max)):
            val = X[:, k, :3]
            exc = np.maximum(np.abs(val) - lim, 0.0)
            J += cfg.w_soft * float(np.sum(exc * exc))
            if grad:
                dX[:, k, :3] += 2.0 * cfg.w_soft * exc * np.sign(val)
            if _curv:
                curv[:, k, :3] += 2.0 * cfg.w_soft * (exc > 0)

        if tilt2 is not None:
            zt = X[:, 0, 2] - ctx.z_ref
            f = sigmoid_gate(zt, cfg.h_d)
            J += cfg.alpha_L * float(np.sum(f * tilt2))
            if grad:
                dX[:, 0, 2] += cfg.alpha_L * sigmoid_gate_grad(zt, cfg.h_d) * tilt2
            if _curv:
                slope = np.where(zt >= BRANCH_POINT, -1.0 / 0.15, 1.0 / 0.01)
                f2 = slope ** 2 * f * (1.0 - f) * (1.0 - 2.0 * f)
                curv[:, 0, 2] += cfg.alpha_L * np.maximum(f2, 0.0) * tilt2

        if not np.isfinite(J):
            bad = np.nonzero(~np.isfinite(X).all(axis=(1, 2)))[0]
            step = int(bad[0]) + 1 if len(bad) else -1
            raise ObjectiveError(f"non-finite objective (first bad horizon step: {step})")
        if not grad:
            return J
        g = self.Gamma.T @ dX.reshape(cfg.Mp * 3, 4)
        th = 2.0 * cfg.T * h
        g += th
        g[:-1] -= th[1:]
        if _curv:
            return J, g, curv.reshape(cfg.Mp * 3, 4)
        return J, g

    # -- solver --------------------------------------------------------
    def _project(self, U):
        return np.clip(U, -self.cfg.u_max, self.cfg.u_max)

    def warm_start(self, previous: np.ndarray | None) -> np.ndarray:
        if previous is None:
            return np.zeros((self.cfg.Mc, 4))
        return self._project(np.vstack([previous[1:], previous[-1:]]))

    def solve(self, ctx: LandingContext, x0, warm: np.ndarray | None = None) -> MpcSolution:
        """Projected descent with Armijo backtracking from a warm start.

        The search direction is a projected Newton step on the generalised
        Hessian (quadratic part, active soft-bound hinges and the convex part
        of the barrier curvature); inputs pinned at a bound are held fixed. A
        plain projected gradient step is tried when that direction fails to
        descend. Iterates only ever decrease ``J``, so the result never costs
        more than the warm start.
        """
        cfg = self.cfg
        t_start = time.perf_counter()
        cache = (self._reference(ctx.xstar), self._tilt2(ctx))
        U = self._project(np.zeros((cfg.Mc, 4)) if warm is None else np.asarray(warm, dtype=float))
        J, g, curv = self.objective(ctx, x0, U, _cache=cache, _curv=True)
        J_warm = J
        it = 0
        limited = False
        while True:
            if it >= cfg.max_iter:
                limited = True
                break
            if cfg.budget_ms is not None and (time.perf_counter() - t_start) * 1e3 > cfg.budget_ms:
                limited = True
                break
            it += 1
            accepted = False
            for d, alpha in ((self._newton_direction(U, g, curv), 1.0), (-g, self._gradient_scale(g))):
                for _ in range(30):
                    Un = self._project(U + alpha * d)
                    slope = float(np.sum(g * (Un - U)))
                    if slope < 0:
                        Jn = self.objective(ctx, x0, Un, grad=False, _cache=cache)
                        if Jn <= J + 1e-4 * slope:
                            accepted = True
                            break
                    alpha *= 0.5
                if accepted:
                    break
            if not accepted:
                break
            decrease = J - Jn
            U = Un
            J, g, curv = self.objective(ctx, x0, U, _cache=cache, _curv=True)
            if decrease <= 1e-10 * max(1.0, abs(J)):
                break
        states = self.horizon_states(x0, U)
        return MpcSolution(
            u_seq=U, states=states, J=J, J_warm=J_warm, vref=states[0, VEL].copy(),
            iterations=it, budget_limited=limited,
        )

    def _hessian(self, a: int, curv_a: np.ndarray) -> np.ndarray:
        H = (self.Gamma.T * curv_a) @ self.Gamma + 2 * self.cfg.T[a] * self._DtD
        return H + 1e-9 * np.trace(H) / self.cfg.Mc * np.eye(self.cfg.Mc)

    def _newton_direction(self, U, g, curv) -> np.ndarray:
        # Inputs pinned at a bound with the gradient pushing outward stay put.
        umax = self.cfg.u_max
        eps = 1e-6 * umax
        pinned = ((U <= -umax + eps) & (g > 0)) | ((U >= umax - eps) & (g < 0))
        d = np.zeros_like(U)
        for a in range(4):
            free = ~pinned[:, a]
            if not free.any():
                continue
            base = np.array_equal(curv[:, a], self._base_curv[:, a])
            if base and free.all():
                d[:, a] = -self._Hinv[a] @ g[:, a]
                continue
            H = self._H[a] if base else self._hessian(a, curv[:, a])
            d[free, a] = -np.linalg.solve(H[np.ix_(free, free)], g[free, a])
        return d

    def _gradient_scale(self, g) -> float:
        # Step that would move the largest input component by 10 % of its bound.
        gmax = float(np.max(np.abs(g) / self.cfg.u_max))
        return 0.1 / gmax if gmax > 0 else 0.0


def activation_check(
    uav_state: np.ndarray,
    xstar: np.ndarray,
    fft_accuracy: float,
    acc_threshold: float = 0.8,
    pos_threshold: float = 0.1,
    vel_threshold: float = 0.1,
) -> bool:
    """Whether the landing barrier may be enabled."""
    s = np.asarray(uav_state, dtype=float)
    xs = np.asarray(xstar, dtype=float)
    ex, ey = s[POS[0]] - xs[POS[0]], s[POS[1]] - xs[POS[1]]
    return bool(
        fft_accuracy >= acc_threshold
        and abs(ex) <= pos_threshold and abs(ey) <= pos_threshold
        and abs(s[VEL[0]]) <= vel_threshold and abs(s[VEL[1]]) <= vel_threshold
    )


__all__ = [
    "ACC", "MpcConfig", "LandingContext", "MpcSolution", "LandingMPC", "ObjectiveError",
    "activation_check", "landing_cost", "sigmoid_gate", "sigmoid_gate_grad",
]
