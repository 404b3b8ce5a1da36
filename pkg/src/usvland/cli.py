"""Command-line entry point: ``usvland episode|batch|predict|spectrum``."""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .harness import CONTROLLERS, prediction_study, run_batch, run_episode, write_prediction_csv
from .pose_stream import NotReady, PoseBuffer, read_pose_csv, resample_window, write_pose_csv
from .scenarios import load_scenario
from .sea_sim import sample_sensor
from .spectral import identify, spectrum_rows


class ConfigError(Exception):
    pass


def _scenario(arg):
    try:
        return load_scenario(arg)
    except (ValueError, TypeError, json.JSONDecodeError) as exc:
        raise ConfigError(f"bad scenario {arg!r}: {exc}") from exc


def _out_dir(arg) -> Path:
    out = Path(arg)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _emit(summary: dict, out: Path | None, name: str) -> None:
    text = json.dumps(summary, indent=2)
    if out is not None:
        (out / name).write_text(text + "\n")
    print(text)


def cmd_episode(a) -> int:
    sc = _scenario(a.scenario)
    out = _out_dir(a.out) if a.out else None
    rec = run_episode(sc, a.controller, a.seed, out, a.forecast)
    _emit(asdict(rec), out, f"episode_{a.controller}_{a.seed}.json")
    return 0


def cmd_batch(a) -> int:
    sc = _scenario(a.scenario)
    if a.n < 1:
        raise ConfigError("--n must be at least 1")
    seeds = range(a.seed, a.seed + a.n)
    out = _out_dir(a.out) if a.out else None
    _, summary = run_batch(sc, a.controller, a.n, seeds, out, a.forecast, a.jobs, a.timelines)
    _emit(summary.to_dict(), None, "")
    return 0


def cmd_predict(a) -> int:
    sc = _scenario(a.scenario)
    try:
        horizons = [float(h) for h in a.horizons.split(",")]
        rows = prediction_study(sc, horizons, a.sensor, a.seed, a.warmup, a.duration)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    out = _out_dir(a.out) if a.out else None
    if out is not None:
        write_prediction_csv(rows, out / f"prediction_{a.sensor}.csv")
    summary = {"scenario": sc.name, "sensor": a.sensor, "rmse": {str(h): e for h, e, _ in rows}, "ticks": rows[0][2]}
    _emit(summary, out, f"prediction_{a.sensor}.json")
    return 0


def cmd_spectrum(a) -> int:
    if a.poses:
        try:
            samples = read_pose_csv(a.poses)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read pose log: {exc}") from exc
    else:
        sc = _scenario(a.scenario)
        wave = sc.realize(a.seed)
        spec = sc.vision if a.sensor == "vision" else sc.imu
        rng = np.random.default_rng(a.seed)
        n = int((a.span + 1.0) * spec.rate) + 1
        samples = [s for s in (sample_sensor(spec, wave, i / spec.rate, rng) for i in range(n)) if s is not None]
    buf = PoseBuffer(retention=float("inf"), max_gap=a.max_gap)
    try:
        for s in samples:
            buf.push(s)
        window = resample_window(buf, a.span, a.rate)
    except (ValueError, NotReady) as exc:
        raise ConfigError(f"cannot build a {a.span} s window: {exc}") from exc
    out = _out_dir(a.out) if a.out else None
    if out is not None:
        if not a.poses:
            write_pose_csv(out / "poses.csv", samples)
        with open(out / f"spectrum_b{a.axis}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["f", "amplitude", "phase"])
            for f, amp, ph in spectrum_rows(window, a.axis):
                w.writerow([repr(f), repr(amp), repr(ph)])
    ms = identify(window, a.axis, a.gate)
    summary = {
        "axis": a.axis,
        "offset": ms.offset,
        "t_fft": ms.t_fft,
        "modes": [{"f": m.f, "A": m.A, "phi": m.phi} for m in ms.modes],
    }
    _emit(summary, out, f"modes_b{a.axis}.json")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="usvland", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, scenario_default="harsh"):
        sp.add_argument("--scenario", default=scenario_default, help="fixture name or JSON file")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", default=None, help="output directory")

    e = sub.add_parser("episode", help="simulate one landing")
    common(e)
    e.add_argument("--controller", choices=CONTROLLERS, default="mpc_ne")
    e.add_argument("--forecast", choices=("observer", "truth"), default="observer")
    e.set_defaults(func=cmd_episode)

    b = sub.add_parser("batch", help="Monte Carlo batch; seeds run from --seed upward")
    common(b)
    b.add_argument("--controller", choices=CONTROLLERS, default="mpc_ne")
    b.add_argument("--forecast", choices=("observer", "truth"), default="observer")
    b.add_argument("--n", type=int, default=100)
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--timelines", action="store_true", help="also write per-episode timelines")
    b.set_defaults(func=cmd_batch)

    r = sub.add_parser("predict", help="tilt forecast RMSE per horizon")
    common(r, "moderate")
    r.add_argument("--sensor", choices=("vision", "imu"), default="imu")
    r.add_argument("--horizons", default="0,0.25,0.5,0.75,1.0", help="comma-separated seconds")
    r.add_argument("--warmup", type=float, default=30.0)
    r.add_argument("--duration", type=float, default=60.0)
    r.set_defaults(func=cmd_predict)

    s = sub.add_parser("spectrum", help="amplitude spectrum and identified modes of one axis")
    common(s, "moderate")
    s.add_argument("--poses", default=None, help="pose CSV t,b1..b6; otherwise the scenario is sensed")
    s.add_argument("--sensor", choices=("vision", "imu"), default="vision")
    s.add_argument("--axis", type=int, choices=range(1, 7), default=4)
    s.add_argument("--span", type=float, default=20.0)
    s.add_argument("--rate", type=float, default=30.0)
    s.add_argument("--gate", type=float, default=0.02)
    s.add_argument("--max-gap", type=float, default=0.5)
    s.set_defaults(func=cmd_spectrum)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
