"""Closed-loop episodes, Monte Carlo batches and the prediction study."""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from .estimator import DeckEstimator, EstimatorConfig
from .mission import Command, MissionParams, MissionState, Observations, Phase, automaton_step
from .mpc import LandingContext, LandingMPC, MpcConfig, MpcSolution
from .scenarios import Scenario, load_scenario
from .sea_sim import check_touchdown, deck_pose, initial_uav_state, plant_step, sample_sensor
from .uav_model import ACC, POS, STATE_DIM, STATE_NAMES, VEL

PLANT_DT = 0.01
CONTROL_EVERY = 5  # plant steps per controller cycle (20 Hz)
SUCCESS_TILT = 0.35
CONTROLLERS = ("mpc_ne", "baseline")
TIMELINE_COLUMNS = (
    ["t", "phase"] + list(STATE_NAMES) + ["vref_x", "vref_y", "vref_z", "vref_eta", "J", "fft_accuracy", "forecast_tilt_0"]
)


@dataclass
class EpisodeRecord:
    seed: int
    controller: str
    timeline: str | None
    t_fft_ready: float | None
    t_touchdown: float | None
    tilt: float | None
    lateral_offset: float | None
    rel_vz: float | None
    success: bool
    budget_limited: int
    solves: int
    land_entries: int
    outcome: str  # landed | timeout | aborted | off_pad

    @property
    def landed(self) -> bool:
        return self.t_touchdown is not None


RECORD_COLUMNS = [f.name for f in fields(EpisodeRecord)]


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, float):
        return repr(v)
    return str(v)


class _Forecaster:
    """Tilt forecasts either from the true wave or from the online estimator."""

    def __init__(self, scenario: Scenario, wave, truth: bool, rng):
        self.wave = wave
        self.truth = truth
        self.rng = rng
        self.sensor = scenario.vision
        self.next_frame = 0.0
        self.est = None
        if not truth:
            cfg = EstimatorConfig(rate=self.sensor.rate, R=max(self.sensor.noise_ang ** 2, 1e-8), **scenario.estimator)
            self.est = DeckEstimator(cfg)

    def sense(self, t: float, visible: bool) -> None:
        # Frames are requested on the nominal sensor clock; invisible frames
        # still consume their random draws.
        while self.next_frame <= t + 1e-9:
            t_req = self.next_frame
            self.next_frame = round(self.next_frame + 1.0 / self.sensor.rate, 9)
            s = sample_sensor(self.sensor, self.wave, t_req, self.rng)
            if self.truth or s is None or not visible:
                continue
            last = self.est.buffer.last_t
            if last is not None and s.t <= last:
                continue
            self.est.push(s)

    def pad(self, t: float):
        if self.truth:
            return tuple(deck_pose(self.wave, t)[:3])
        p = self.est.pad_estimate()
        return None if p is None else tuple(p)

    @property
    def accuracy(self) -> float:
        if self.truth:
            return 1.0
        return self.est.accuracy if self.est.latched else 0.0

    @property
    def latched(self) -> bool:
        return self.truth or self.est.latched

    def tilts(self, times: np.ndarray):
        if self.truth:
            return self.wave.axis(4, times), self.wave.axis(5, times)
        if not self.est.ready:
            return None, None
        return self.est.forecast(4, times), self.est.forecast(5, times)


def _pad_visible(uav: np.ndarray, wave, t: float, sc: Scenario) -> bool:
    b = deck_pose(wave, t)
    height = uav[POS[2]] - b[2]
    if height < 0:
        return False
    offset = math.hypot(uav[POS[0]] - b[0], uav[POS[1]] - b[1])
    return offset <= max(height * math.tan(sc.camera_half_fov), sc.pad_halfwidth)


def _ramp_reference(xstar: np.ndarray, z_from: float, t_rel: float, speed: float, Mp: int, dt: float) -> np.ndarray:
    """Constant-velocity descent toward ``xstar[z]`` starting at ``z_from``."""
    ref = np.tile(xstar, (Mp, 1))
    tk = t_rel + dt * np.arange(1, Mp + 1)
    z = z_from - speed * tk
    floor = xstar[POS[2]]
    ref[:, POS[2]] = np.maximum(z, floor)
    ref[:, VEL[2]] = np.where(z > floor, -speed, 0.0)
    return ref


def run_episode(
    scenario: Scenario | str | dict,
    controller: str = "mpc_ne",
    seed: int = 0,
    out_dir: str | Path | None = None,
    forecast: str = "observer",
) -> EpisodeRecord:
    """Simulate one landing attempt.

    Args:
        scenario: fixture name, JSON path, dict or :class:`Scenario`.
        controller: ``"mpc_ne"`` (tilt-aware landing) or ``"baseline"``
            (random delay, then a constant-velocity descent).
        seed: episode seed; fixes the wave realisation and every noise draw.
        out_dir: directory for the timeline CSV; nothing is written if None.
        forecast: ``"observer"`` runs the vision pipeline, ``"truth"`` feeds
            the true deck motion to the controller.

    Returns:
        The episode record. Timeouts and aborts are failures, not errors.
    """
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    if controller not in CONTROLLERS:
        raise ValueError(f"unknown controller {controller!r}")
    if forecast not in ("observer", "truth"):
        raise ValueError(f"unknown forecast mode {forecast!r}")
    truth = forecast == "truth"
    is_base = controller == "baseline"

    wave = sc.realize(seed)
    ss = np.random.SeedSequence(int(seed))
    rng_sensor, rng_start, rng_delay = (np.random.default_rng(s) for s in ss.spawn(3))
    params = MissionParams(**sc.mission)
    mpc = LandingMPC(MpcConfig(**sc.mpc))
    cfg = mpc.cfg
    fc = _Forecaster(sc, wave, truth, rng_sensor)

    r = rng_start.uniform(*sc.start_offset)
    ang = rng_start.uniform(-math.pi, math.pi)
    uav = initial_uav_state(r * math.cos(ang), r * math.sin(ang), sc.start_height)
    delay = float(rng_delay.uniform(*sc.baseline_delay))

    mission = MissionState()
    plan: MpcSolution | None = None
    u_prev = np.zeros(4)
    wind_hat = np.zeros(4)
    v_air_model = np.zeros(4)
    vref = np.zeros(4)
    rows: list[list] = []
    t_collect = t_land = z_land = None
    budget_limited = solves = 0
    contact = None
    outcome = "timeout"
    n_steps = int(round(sc.timeout / PLANT_DT))
    k_sub = 0

    for k in range(n_steps + 1):
        t = round(k * PLANT_DT, 9)
        visible = _pad_visible(uav, wave, t, sc)
        fc.sense(t, visible)

        if k % CONTROL_EVERY == 0:
            if is_base:
                permitted = t_collect is not None and t >= t_collect + delay
                acc = 1.0
            else:
                permitted, acc = fc.latched, fc.accuracy
            obs_ = Observations(
                t=t, uav=uav, pad_visible=visible, pad=fc.pad(t) if visible else None,
                fft_accuracy=acc, land_permitted=permitted,
            )
            prev_phase = mission.phase
            mission, cmd = automaton_step(mission, obs_, params)
            if mission.phase is Phase.COLLECT and t_collect is None:
                t_collect = t
            if mission.phase is Phase.LAND and prev_phase is not Phase.LAND:
                t_land, z_land = t, float(uav[POS[2]])
            if mission.aborted:
                outcome = "aborted"
                break
            if cmd.xstar is None:
                break

            x0 = uav.copy()
            if plan is not None:
                x0[VEL] = plan.states[CONTROL_EVERY - 1, VEL]
                x0[ACC] = plan.states[CONTROL_EVERY - 1, ACC]
            else:
                x0[ACC] = 0.0
            ctx = _context(cmd, fc, mpc, t, is_base, t_land, z_land, sc, u_prev)
            warm = None if plan is None else _shift(mpc, plan.u_seq)
            plan = mpc.solve(ctx, x0, warm)
            solves += 1
            budget_limited += int(plan.budget_limited)
            u_prev = plan.u_seq[min(CONTROL_EVERY, cfg.Mc) - 1].copy()
            k_sub = 0
            b4, b5 = ctx.tilt_b4, ctx.tilt_b5
            ftilt = float(np.hypot(b4[0], b5[0])) if b4 is not None else float("nan")
            rows.append(
                [t, mission.phase.value, *uav, *plan.vref, plan.J, fc.accuracy if not is_base else float("nan"), ftilt]
            )

        # Inner loop: stream planned velocities, compensating the estimated wind.
        vref = plan.states[min(k_sub, cfg.Mp - 1), VEL] if plan is not None else np.zeros(4)
        k_sub += 1
        cmd_v = vref - wind_hat
        uav_next = plant_step(sc.plant, uav, cmd_v, PLANT_DT)
        v_air_model = plant_step(replace(sc.plant, wind=(0.0, 0.0, 0.0)), _vel_state(v_air_model), cmd_v, PLANT_DT)[VEL]
        wind_hat = 0.9 * wind_hat + 0.1 * (uav_next[VEL] - v_air_model)
        uav = uav_next
        t_next = round((k + 1) * PLANT_DT, 9)

        b = deck_pose(wave, t_next)
        if math.hypot(uav[POS[0]] - b[0], uav[POS[1]] - b[1]) <= sc.deck_halfwidth:
            contact = check_touchdown(uav, wave, t_next, sc.pad_halfwidth)
            if contact is not None:
                outcome = "landed" if contact.on_pad else "off_pad"
                break

    t_ready = t_collect if (truth or is_base) else fc.est.latched_at
    landed = contact is not None and contact.on_pad
    record = EpisodeRecord(
        seed=int(seed), controller=controller, timeline=None,
        t_fft_ready=t_ready,
        t_touchdown=contact.t if contact is not None else None,
        tilt=contact.tilt if contact is not None else None,
        lateral_offset=contact.lateral_offset if contact is not None else None,
        rel_vz=contact.rel_vz if contact is not None else None,
        success=bool(landed and contact.tilt < SUCCESS_TILT),
        budget_limited=budget_limited, solves=solves,
        land_entries=mission.land_entries, outcome=outcome,
    )
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        path = out / f"timeline_{controller}_{seed}.csv"
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TIMELINE_COLUMNS)
            for row in rows:
                w.writerow([_fmt(v) if not isinstance(v, (float, np.floating)) else repr(float(v)) for v in row])
        record.timeline = str(path)
    return record


def _vel_state(v: np.ndarray) -> np.ndarray:
    s = np.zeros(STATE_DIM)
    s[VEL] = v
    return s


def _shift(mpc: LandingMPC, U: np.ndarray) -> np.ndarray:
    # One controller cycle spans several model steps.
    for _ in range(CONTROL_EVERY):
        U = mpc.warm_start(U)
    return U


def _context(cmd: Command, fc: _Forecaster, mpc: LandingMPC, t, is_base, t_land, z_land, sc, u_prev) -> LandingContext:
    cfg = mpc.cfg
    times = t + cfg.dt_pred * np.arange(1, cfg.Mp + 1)
    xstar = cmd.xstar
    land = cmd.land_active
    if is_base and land:
        xstar = _ramp_reference(cmd.xstar, z_land, t - t_land, sc.baseline_descent, cfg.Mp, cfg.dt_pred)
        land = False
    b4, b5 = fc.tilts(times)
    if b4 is None:
        land = False
    return LandingContext(
        xstar=xstar, tilt_b4=b4, tilt_b5=b5, z_ref=cmd.z_ref, land_active=land, u_prev=u_prev,
    )


# -- batches ---------------------------------------------------------------

@dataclass
class BatchSummary:
    n: int
    controller: str
    scenario: str
    n_landed: int
    n_success: int
    hist_edges_deg: list
    hist_counts: list
    frac_within_10: float
    frac_within_15: float
    frac_within_20: float
    tilt_p80_deg: float | None
    frac_within_50s: float | None

    def to_dict(self) -> dict:
        return asdict(self)


def summarize(records: list[EpisodeRecord], scenario: str = "", bin_deg: float = 2.0) -> BatchSummary:
    """Batch statistics; episodes that never touched the pad count as failures."""
    if not records:
        raise ValueError("need at least one episode")
    n = len(records)
    tilts = np.array([math.degrees(r.tilt) for r in records if r.landed and r.outcome == "landed"])
    edges = np.arange(0.0, 30.0 + bin_deg, bin_deg)
    counts, _ = np.histogram(np.minimum(tilts, edges[-1] - 1e-9), bins=edges)
    succ = [r for r in records if r.success]
    timely = [r for r in succ if r.t_fft_ready is not None and r.t_touchdown - r.t_fft_ready <= 50.0]
    return BatchSummary(
        n=n,
        controller=records[0].controller,
        scenario=scenario,
        n_landed=int(len(tilts)),
        n_success=len(succ),
        hist_edges_deg=[float(e) for e in edges],
        hist_counts=[int(c) for c in counts],
        frac_within_10=float(np.sum(tilts < 10.0)) / n,
        frac_within_15=float(np.sum(tilts < 15.0)) / n,
        frac_within_20=float(np.sum(tilts < 20.0)) / n,
        tilt_p80_deg=float(np.percentile(tilts, 80)) if len(tilts) else None,
        frac_within_50s=len(timely) / len(succ) if succ else None,
    )


def _episode_job(args):
    sc_dict, controller, seed, out_dir, forecast = args
    return run_episode(Scenario.from_dict(sc_dict), controller, seed, out_dir, forecast)


def run_batch(
    scenario: Scenario | str | dict,
    controller: str = "mpc_ne",
    n: int = 100,
    seeds=None,
    out_dir: str | Path | None = None,
    forecast: str = "observer",
    jobs: int = 1,
    timelines: bool = False,
):
    """Run ``n`` independent episodes.

    Returns:
        ``(records, summary)``. With ``out_dir`` set, ``episodes.csv`` and
        ``summary.json`` are written there; rows follow the seed order and
        timeline paths are relative to ``out_dir``.
    """
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    if n < 1:
        raise ValueError("n must be at least 1")
    seeds = list(range(n)) if seeds is None else [int(s) for s in seeds][:n]
    if len(seeds) < n:
        raise ValueError("fewer seeds than episodes")
    tl_dir = None
    if out_dir is not None and timelines:
        tl_dir = str(Path(out_dir) / "timelines")
    jobs_args = [(sc.to_dict(), controller, s, tl_dir, forecast) for s in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            records = list(ex.map(_episode_job, jobs_args))
    else:
        records = [run_episode(sc, controller, s, tl_dir, forecast) for s in seeds]
    if tl_dir is not None:
        # Timeline paths relative to the batch directory keep episodes.csv location-independent.
        records = [replace(r, timeline=str(Path(r.timeline).relative_to(out_dir))) if r.timeline else r
                   for r in records]
    summary = summarize(records, sc.name)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_records(records, out / "episodes.csv")
        with open(out / "summary.json", "w") as fh:
            json.dump(summary.to_dict(), fh, indent=2)
    return records, summary


def write_records(records: list[EpisodeRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in RECORD_COLUMNS])


def read_records(path: str | Path) -> list[EpisodeRecord]:
    def parse(name, s):
        if s == "":
            return None
        if name in ("seed", "budget_limited", "solves", "land_entries"):
            return int(s)
        if name == "success":
            return bool(int(s))
        if name in ("controller", "timeline", "outcome"):
            return s
        return float(s)

    with open(path, newline="") as fh:
        return [EpisodeRecord(**{k: parse(k, v) for k, v in row.items()}) for row in csv.DictReader(fh)]


# -- prediction study ------------------------------------------------------

def prediction_study(
    scenario: Scenario | str | dict,
    horizons=(0.0, 0.25, 0.5, 0.75, 1.0),
    sensor: str = "imu",
    seed: int = 0,
    warmup: float = 30.0,
    duration: float = 60.0,
    tick: float = 0.05,
    sensor_spec=None,
) -> list[tuple[float, float, int]]:
    """Tilt forecast error against ground truth for a hovering observer.

    The estimator runs on the sensed stream; from ``warmup`` seconds on, at
    every ``tick`` the forecast of each horizon (measured from the newest
    filtered sample) is compared with the true tilt.

    Returns:
        ``(horizon, rmse, count)`` rows; tilt error is the norm of the pitch
        and roll errors.
    """
    sc = scenario if isinstance(scenario, Scenario) else load_scenario(scenario)
    hs = np.asarray(horizons, dtype=float)
    if np.any(hs < 0) or np.any(hs > 1.0):
        raise ValueError("horizons must lie in [0, 1] s")
    if sensor not in ("vision", "imu"):
        raise ValueError(f"unknown sensor {sensor!r}")
    spec = sensor_spec or (sc.vision if sensor == "vision" else sc.imu)
    wave = sc.realize(seed)
    rng = np.random.default_rng(np.random.SeedSequence(int(seed)).spawn(1)[0])
    cfg = EstimatorConfig(rate=spec.rate, R=max(spec.noise_ang ** 2, 1e-8), **sc.estimator)
    est = DeckEstimator(cfg)
    sq = np.zeros(len(hs))
    count = 0
    n_frames = int(duration * spec.rate) + 1
    next_tick = warmup
    for i in range(n_frames):
        t_req = i / spec.rate
        s = sample_sensor(spec, wave, t_req, rng)
        if s is not None and (est.buffer.last_t is None or s.t > est.buffer.last_t):
            est.push(s)
        if t_req + 1e-9 >= next_tick and est.ready:
            next_tick += tick
            t0 = min(st.t_last for st in est.observers.values())
            times = t0 + hs
            e4 = est.forecast(4, times) - wave.axis(4, times)
            e5 = est.forecast(5, times) - wave.axis(5, times)
            sq += e4 ** 2 + e5 ** 2
            count += 1
    if count == 0:
        raise RuntimeError("observer never became ready; lengthen the study")
    rmse = np.sqrt(sq / count)
    return [(float(h), float(e), count) for h, e in zip(hs, rmse)]


def write_prediction_csv(rows, path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["horizon", "rmse", "count"])
        for h, e, c in rows:
            w.writerow([repr(h), repr(e), c])


__all__ = [
    "EpisodeRecord", "BatchSummary", "run_episode", "run_batch", "summarize", "prediction_study",
    "write_records", "read_records", "write_prediction_csv", "SUCCESS_TILT", "TIMELINE_COLUMNS",
]
