"""Flat ``key = value`` run configuration.

Blank lines and ``#`` comments are ignored.  Unknown keys are an error so
typos do not silently fall back to defaults.  The file path can come from
``--config`` or from the ``DOBWIND_CONFIG`` environment variable.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, fields, replace

from .errors import ParseError
from .frames import UavParams
from .pipeline import FilterSchedule, PipelineConfig
from .plant import TunnelProtocol, barrel_airframe, constant_drag

ENV_VAR = "DOBWIND_CONFIG"


@dataclass(frozen=True)
class Config:
    # vehicle
    mass_kg: float = 8.0
    gravity: float = 9.81
    thrust_a: float = 207.0
    thrust_b: float = 11.34
    thrust_c: float = 0.01315
    observer_tau_s: float = 0.3  # sets lambda = 2 m / tau on every axis
    desired_yaw_deg: float = 0.0
    sample_dt: float = 0.01

    # simulated airframe: "barrel" (default profile) or "constant"
    airframe: str = "barrel"
    drag_coeff: float = 0.2  # constant airframe only
    drag_exponent: float = 2.0  # constant airframe only
    noise_sigma: float = 0.5  # N, additive force noise
    seed: int = 0

    # simulate
    scenario: str = "tunnel"  # tunnel | flight | vertical | ramp
    tunnel_speeds: str = "0,1,2,3,4,5,6,7,8"
    tunnel_yaw_step_deg: float = 10.0
    tunnel_dwell_s: float = 20.0
    tunnel_heading_offset_deg: float = 0.0
    flight_speed: float = 2.0
    ramp_peak: float = 10.0
    ramp_direction_deg: float = 65.0
    ramp_s: float = 100.0

    # calibrate
    clean_k: int = 5
    clean_threshold: float = 3.0

    # estimate
    filter_f_low: float = 0.5
    filter_f_high: float = 1.5
    filter_v_low: float = 1.0
    filter_v_high: float = 6.0
    filter_slew: float = 1.0
    ground_sign: float = -1.0
    yaw_source: str = "measured"  # measured | fixed
    low_force_n: float = 0.5
    warmup_tau: float = 5.0
    direction_convention: str = "vector"  # vector | from

    # evaluate
    min_angle_speed: float = 1.0
    min_true_speed: float = 0.0

    def params(self):
        lam = 2.0 * self.mass_kg / self.observer_tau_s
        return UavParams(
            mass_kg=self.mass_kg,
            gravity=self.gravity,
            thrust_coeffs=(self.thrust_a, self.thrust_b, self.thrust_c),
            observer_gain=(lam, lam, lam),
            desired_yaw_rad=math.radians(self.desired_yaw_deg),
            sample_dt=self.sample_dt,
        )

    def drag_model(self):
        if self.airframe == "barrel":
            return barrel_airframe(noise_sigma=self.noise_sigma, rng_seed=self.seed)
        if self.airframe == "constant":
            return constant_drag(self.drag_coeff, speed_exponent=self.drag_exponent,
                                 noise_sigma=self.noise_sigma, rng_seed=self.seed)
        raise ParseError(f"unknown airframe {self.airframe!r}")

    def tunnel_protocol(self):
        speeds = tuple(float(s) for s in self.tunnel_speeds.split(",") if s.strip())
        return TunnelProtocol(
            speeds,
            math.radians(self.tunnel_yaw_step_deg),
            self.tunnel_dwell_s,
            math.radians(self.tunnel_heading_offset_deg),
        )

    def pipeline(self):
        schedule = FilterSchedule(self.filter_f_low, self.filter_f_high, self.filter_v_low,
                                  self.filter_v_high, self.filter_slew)
        return PipelineConfig(schedule, self.ground_sign, self.yaw_source, self.low_force_n,
                              self.warmup_tau)


def _coerce(name, kind, text, line):
    try:
        if kind == "int":
            return int(text)
        if kind == "float":
            value = float(text)
            if not math.isfinite(value):
                raise ValueError
            return value
        return text
    except ValueError:
        raise ParseError(f"bad value {text!r} for {name}", line=line) from None


def parse_config(text, base=None):
    """Apply ``key = value`` lines from ``text`` on top of ``base`` (defaults)."""
    base = Config() if base is None else base
    kinds = {f.name: f.type for f in fields(Config)}
    updates = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ParseError("expected key = value", line=lineno)
        if key not in kinds:
            raise ParseError(f"unknown key {key!r}", line=lineno)
        updates[key] = _coerce(key, kinds[key], value.strip(), lineno)
    return replace(base, **updates)


def load_config(path=None):
    """Read ``path``, else ``$DOBWIND_CONFIG``, else return the defaults."""
    path = path or os.environ.get(ENV_VAR)
    if not path:
        return Config()
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def dump_config(cfg):
    return "".join(f"{f.name} = {getattr(cfg, f.name)}\n" for f in fields(cfg))
