"""Command line: simulate, calibrate, estimate, evaluate.

Exit status is 0 on success, 1 on a usage error and 2 on a data or model
fault (malformed or empty files, missing model, failed fit).
"""

from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

import numpy as np

from . import plant
from .airmodel import ForceAirModel, calibrate
from .config import ENV_VAR, load_config
from .errors import ParseError, WindEstimationError
from .evaluation import estimates_from_truth, evaluate, format_report, report_csv
from .pipeline import estimate_log
from .telemetry import parse_estimates, parse_telemetry, sniff_kind, write_estimates, write_telemetry

SCENARIOS = ("tunnel", "flight", "vertical", "ramp")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def build_parser():
    p = _Parser(prog="dobwind", description="Wind estimation from multirotor telemetry.")
    p.add_argument("--config", help=f"key=value config file (default: ${ENV_VAR} or built-in defaults)")
    p.add_argument("--seed", type=int, help="RNG seed for simulated noise (overrides config)")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="write a simulated telemetry log")
    s.add_argument("--scenario", choices=SCENARIOS, help="overrides config 'scenario'")
    s.add_argument("--out", required=True)

    c = sub.add_parser("calibrate", help="fit a force-air model from tunnel (and vertical) logs")
    c.add_argument("--tunnel", required=True)
    c.add_argument("--vertical")
    c.add_argument("--out", required=True)

    e = sub.add_parser("estimate", help="estimate wind along a telemetry log")
    e.add_argument("--model", required=True)
    e.add_argument("--log", required=True)
    e.add_argument("--out", required=True)

    v = sub.add_parser("evaluate", help="compare estimates against logged wind truth")
    v.add_argument("--estimates", required=True, help="estimates CSV, or a telemetry CSV with truth")
    v.add_argument("--truth", required=True)
    v.add_argument("--out", help="CSV report path")
    v.add_argument("--text", help="plain-text report path (default: stdout)")
    return p


def _simulate(cfg, args):
    params = cfg.params()
    model = cfg.drag_model()
    scenario = args.scenario or cfg.scenario
    calm = plant.WindScript([(1.0, np.zeros(3))])
    if scenario == "tunnel":
        proto = cfg.tunnel_protocol()
        log = plant.simulate_tunnel_cells(params, model, proto).concat_lanes()
    elif scenario == "flight":
        log = plant.run_flight_scenario(params, model, plant.indoor_flight_script(cfg.flight_speed), calm)
    elif scenario == "vertical":
        log = plant.vertical_calibration_lanes(params, model)
    elif scenario == "ramp":
        wind = plant.ramp_wind_script(cfg.ramp_peak, math.radians(cfg.ramp_direction_deg), ramp_s=cfg.ramp_s)
        log = plant.run_flight_scenario(params, model, plant.hover_script(wind.duration), wind)
    else:
        raise UsageError(f"unknown scenario {scenario!r}")
    log.meta.update(scenario=scenario, seed=cfg.seed, noise_sigma=cfg.noise_sigma, airframe=cfg.airframe)
    write_telemetry(log, args.out)
    extra = f" cells={log.meta['cells']}" if "cells" in log.meta else ""
    print(f"wrote {len(log)} samples to {args.out} (scenario={scenario}{extra})")


def _non_empty(log, path):
    if len(log) == 0:
        raise WindEstimationError(f"{path}: telemetry log has no samples")
    return log


def _calibrate(cfg, args):
    params = cfg.params()
    tunnel = _non_empty(parse_telemetry(args.tunnel), args.tunnel)
    dwell = float(tunnel.meta.get("dwell_s", cfg.tunnel_dwell_s))
    vertical = None
    if args.vertical:
        vertical = _non_empty(parse_telemetry(args.vertical), args.vertical)
    model = calibrate(tunnel, params, dwell, vertical, cfg.clean_k, cfg.clean_threshold)
    model.save(args.out)
    c = ", ".join(f"{x:.5g}" for x in model.horizontal_coeffs)
    print(f"horizontal coefficients ({c}), residual rms {model.horizontal_rms:.4g} m/s")
    print(f"wrote model to {args.out}")


def _estimate(cfg, args):
    try:
        model = ForceAirModel.load(args.model)
    except FileNotFoundError:
        raise WindEstimationError(f"model file not found: {args.model}") from None
    log = _non_empty(parse_telemetry(args.log), args.log)
    est = estimate_log(log, model, cfg.params(), cfg.pipeline())
    est.meta.update(scenario=log.meta.get("scenario", "unknown"))
    write_estimates(est, args.out, cfg.direction_convention)
    print(f"wrote {len(est)} estimates to {args.out}")


def _evaluate(cfg, args):
    if sniff_kind(args.estimates) == "estimates":
        est = parse_estimates(args.estimates)
    else:
        est = estimates_from_truth(parse_telemetry(args.estimates))
    truth = parse_telemetry(args.truth)
    if truth.wind is None:
        raise ParseError(f"{args.truth}: no wind_x,wind_y,wind_z truth columns")
    report = evaluate(est, truth, min_angle_speed=cfg.min_angle_speed, min_true_speed=cfg.min_true_speed)
    text = format_report(report)
    if args.text:
        with open(args.text, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report_csv(report))


COMMANDS = {"simulate": _simulate, "calibrate": _calibrate, "estimate": _estimate, "evaluate": _evaluate}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
        try:
            cfg = load_config(args.config)
        except OSError as exc:
            raise UsageError(f"cannot read config: {exc}") from None
        if args.seed is not None:
            cfg = replace(cfg, seed=args.seed)
        COMMANDS[args.command](cfg, args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except (WindEstimationError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
