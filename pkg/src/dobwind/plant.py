"""Translational quadrotor plant with a synthetic airframe drag law.

The simulator is the truth generator for every closed-loop check: it
integrates ``m p'' = -u_f R e3 + m g e3 + f_e`` with a first-order attitude
lag standing in for the rotational loop, a PID position/velocity controller,
and scripted wind. Batches of independent vehicles ("lanes") are simulated
together by giving every array a leading lane axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .errors import DomainError, SimulationFault
from .frames import (
    E3,
    UavState,
    body_z_axis,
    rpm_from_thrust,
    wrap_angle,
    yaw_rotate,
)
from .telemetry import TelemetryLog

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DragModel:
    """Airflow-aligned drag: ``|F_h| = C(angle) * |a_h|**p``, same law vertically.

    ``p = 2`` is ordinary quadratic drag.  The angular profile is a periodic
    piecewise-linear function given by ``(angle_rad, coefficient)`` knots.
    """

    angular_profile: tuple = ((0.0, 0.2), (math.pi / 2, 0.2), (math.pi, 0.2), (3 * math.pi / 2, 0.2))
    vertical_coeff: float = 0.2
    noise_sigma: float = 0.0
    rng_seed: int = 0
    speed_exponent: float = 2.0

    def __post_init__(self):
        knots = tuple(sorted((float(a) % TWO_PI, float(c)) for a, c in self.angular_profile))
        if len(knots) < 4:
            raise DomainError("angular_profile needs at least 4 knots")
        if any(c <= 0 for _, c in knots) or self.vertical_coeff <= 0:
            raise DomainError("drag coefficients must be positive")
        if self.noise_sigma < 0:
            raise DomainError("noise_sigma must be non-negative")
        if not self.speed_exponent > 0:
            raise DomainError("speed_exponent must be positive")
        object.__setattr__(self, "angular_profile", knots)

    def coefficient(self, angle):
        angles, coeffs = zip(*self.angular_profile)
        return np.interp(np.mod(angle, TWO_PI), angles, coeffs, period=TWO_PI)

    def without_noise(self):
        return DragModel(
            self.angular_profile, self.vertical_coeff, 0.0, self.rng_seed, self.speed_exponent
        )


def constant_drag(coeff, vertical_coeff=None, speed_exponent=2.0, noise_sigma=0.0, rng_seed=0):
    knots = tuple((k * math.pi / 2, coeff) for k in range(4))
    return DragModel(
        knots,
        coeff if vertical_coeff is None else vertical_coeff,
        noise_sigma,
        rng_seed,
        speed_exponent,
    )


def barrel_airframe(noise_sigma=0.5, rng_seed=0, n_knots=24):
    """Default airframe: square-root drag with a mildly elliptical profile.

    Force grows as the square root of relative airspeed, so airspeed is
    quadratic in force along every heading (about 3.3 N/sqrt(m/s) along x
    and 3.8 N/sqrt(m/s) along y; roughly 6-10 N over 4-8 m/s).
    """
    angles = np.arange(n_knots) * TWO_PI / n_knots
    inv_sq = 0.08 + 0.01 * np.cos(2 * angles)
    coeffs = 1.0 / np.sqrt(inv_sq)
    return DragModel(
        tuple(zip(angles.tolist(), coeffs.tolist())),
        vertical_coeff=4.0,
        noise_sigma=noise_sigma,
        rng_seed=rng_seed,
        speed_exponent=0.5,
    )


def _power_law(vec, speed, coeff, p):
    # coeff * speed**(p-1) * vec, defined as 0 at zero speed
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(speed > 0, coeff * np.power(speed, p - 1.0), 0.0)
    return scale[..., None] * vec


def drag_force(relative_air, model, rng=None):
    """Drag (N) for relative airflow ``wind - velocity`` in the intermediate frame.

    Noise is added only when ``rng`` is given and ``model.noise_sigma > 0``.
    """
    a = np.asarray(relative_air, dtype=float)
    if not np.all(np.isfinite(a)):
        raise DomainError("relative_air must be finite")
    horiz = a[..., :2]
    speed_h = np.hypot(a[..., 0], a[..., 1])
    coeff = model.coefficient(np.arctan2(a[..., 1], a[..., 0]))
    f_h = _power_law(horiz, speed_h, coeff, model.speed_exponent)
    az = a[..., 2:3]
    f_v = _power_law(az, np.abs(a[..., 2]), model.vertical_coeff, model.speed_exponent)
    force = np.concatenate([f_h, f_v], axis=-1)
    if rng is not None and model.noise_sigma > 0:
        force = force + rng.normal(0.0, model.noise_sigma, size=force.shape)
    return force


@dataclass
class PiecewiseScript:
    """Sequence of ``(duration_s, 3-vector)`` segments.

    ``step`` holds each segment's vector for its whole duration.  With
    ``linear`` interpolation a segment ramps from the previous segment's
    vector to its own over its duration (the first segment is constant).
    After the last segment the final vector is held.
    """

    segments: list
    interpolation: str = "step"

    def __post_init__(self):
        if self.interpolation not in ("step", "linear"):
            raise DomainError(f"unknown interpolation {self.interpolation!r}")
        if not self.segments:
            raise DomainError("script needs at least one segment")
        segs = []
        for duration, vec in self.segments:
            if not duration > 0:
                raise DomainError(f"segment duration must be positive, got {duration}")
            vec = np.asarray(vec, dtype=float)
            if vec.shape != (3,):
                raise DomainError("script vectors must be 3-vectors")
            segs.append((float(duration), vec))
        self.segments = segs
        self._ends = np.cumsum([d for d, _ in segs])

    @property
    def duration(self):
        return float(self._ends[-1])

    def _locate(self, t):
        i = int(np.searchsorted(self._ends, t, side="right"))
        return min(i, len(self.segments) - 1), i >= len(self.segments)

    def value(self, t):
        i, past = self._locate(t)
        duration, vec = self.segments[i]
        if past or self.interpolation == "step" or i == 0:
            return vec.copy()
        prev = self.segments[i - 1][1]
        frac = (t - (self._ends[i] - duration)) / duration
        return prev + frac * (vec - prev)

    def rate(self, t):
        i, past = self._locate(t)
        if past or self.interpolation == "step" or i == 0:
            return np.zeros(3)
        duration, vec = self.segments[i]
        return (vec - self.segments[i - 1][1]) / duration

    def rotated(self, alpha):
        """Same script with every vector yawed by ``alpha`` about z."""
        return type(self)(
            [(d, yaw_rotate(v, alpha)) for d, v in self.segments], self.interpolation
        )


class WindScript(PiecewiseScript):
    """Inertial wind vector (m/s) over time."""


class VelocityScript(PiecewiseScript):
    """Inertial velocity setpoint (m/s) over time."""


@dataclass(frozen=True)
class PositionController:
    """PID on position error with velocity feedback and acceleration feedforward."""

    kp: float = 2.0
    kv: float = 2.5
    ki: float = 0.5
    max_tilt_rad: float = 0.6

    def command(self, state, integral, p_ref, v_ref, a_ref, yaw_sp, params):
        """Return ``(u_f, attitude_setpoint, position_error)``."""
        e_p = p_ref - state.position
        a_des = a_ref + self.kp * e_p + self.kv * (v_ref - state.velocity) + self.ki * integral
        thrust_vec = params.mass_kg * (params.gravity * E3 - a_des)
        z_b = body_z_axis(state.attitude)
        u_f = np.einsum("...i,...i->...", thrust_vec, z_b)
        lo, hi = params.thrust_limits
        u_f = np.clip(u_f, lo, hi)
        att = attitude_from_thrust_direction(thrust_vec, yaw_sp, self.max_tilt_rad)
        return u_f, att, e_p


def attitude_from_thrust_direction(thrust_vec, yaw, max_tilt=None):
    """Roll/pitch placing body z along ``thrust_vec`` at the given yaw."""
    thrust_vec = np.asarray(thrust_vec, dtype=float)
    norm = np.linalg.norm(thrust_vec, axis=-1, keepdims=True)
    b = yaw_rotate(thrust_vec / norm, yaw, inverse=True)
    roll = -np.arcsin(np.clip(b[..., 1], -1.0, 1.0))
    pitch = np.arctan2(b[..., 0], b[..., 2])
    if max_tilt is not None:
        roll = np.clip(roll, -max_tilt, max_tilt)
        pitch = np.clip(pitch, -max_tilt, max_tilt)
    return np.stack([roll, pitch, np.broadcast_to(yaw, roll.shape)], axis=-1)


class StepResult(NamedTuple):
    next_state: UavState
    acceleration: np.ndarray
    external_force: np.ndarray
    rotor_speeds: np.ndarray


def airframe_force(velocity, wind, yaw, model, rng=None):
    """Inertial drag force; the airframe is rotated by its actual yaw."""
    rel_c = yaw_rotate(np.asarray(wind) - velocity, yaw, inverse=True)
    return yaw_rotate(drag_force(rel_c, model, rng), yaw)


def step_dynamics(
    state,
    command,
    wind,
    model,
    params,
    dt,
    rng=None,
    extra_force=None,
    attitude_tau=0.15,
):
    """Advance the plant by ``dt`` with semi-implicit Euler.

    ``command`` is ``(u_f, attitude_setpoint)``.  Returns the next state
    together with the acceleration, external force and rotor speeds realized
    during the step, which is what gets logged for the current sample.
    """
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    if dt > params.sample_dt * (1 + 1e-9):
        raise DomainError(f"dt={dt} exceeds params.sample_dt={params.sample_dt}")
    u_f, att_sp = command
    u_f = np.asarray(u_f, dtype=float)
    omega = rpm_from_thrust(u_f, params)
    z_b = body_z_axis(state.attitude)
    f_e = airframe_force(state.velocity, wind, state.attitude[..., 2], model, rng)
    if extra_force is not None:
        f_e = f_e + extra_force
    m = params.mass_kg
    acc = (-u_f[..., None] * z_b + m * params.gravity * E3 + f_e) / m
    vel = state.velocity + acc * dt
    pos = state.position + vel * dt
    alpha = 1.0 - math.exp(-dt / attitude_tau)
    att_err = wrap_angle(np.asarray(att_sp) - state.attitude)
    att = state.attitude + alpha * att_err
    nxt = UavState(state.t + dt, pos, vel, acc, att, omega)
    for name in ("position", "velocity", "attitude"):
        if not np.all(np.isfinite(getattr(nxt, name))):
            raise SimulationFault(f"non-finite {name} at t={state.t:.4f} s")
    return StepResult(nxt, acc, f_e, omega)


def trim_state(params, model, wind, yaw, controller=PositionController()):
    """Hover equilibrium at rest in steady ``wind`` with heading ``yaw``.

    Returns ``(state, integral)``: attitude and thrust balance the noise-free
    drag so the controller starts without a transient.
    """
    wind = np.asarray(wind, dtype=float)
    yaw = np.asarray(yaw, dtype=float)
    vel = np.zeros_like(wind)
    f = airframe_force(vel, wind, yaw, model.without_noise())
    m = params.mass_kg
    thrust_vec = m * params.gravity * E3 + f
    att = attitude_from_thrust_direction(thrust_vec, yaw)
    u_f = np.linalg.norm(thrust_vec, axis=-1)
    state = UavState(0.0, np.zeros_like(wind), vel, np.zeros_like(wind), att, rpm_from_thrust(u_f, params))
    # controller acceleration demand must equal -f/m at the trim point
    integral = -f / (m * controller.ki)
    return state, integral


def _simulate(
    params,
    model,
    n_steps,
    wind_at,
    ref_at,
    yaw_sp,
    state,
    integral,
    rng,
    controller=PositionController(),
    extra_at=None,
    attitude_tau=0.15,
):
    """Run the closed loop; returns time-major arrays for logging."""
    dt = params.sample_dt
    shape = state.position.shape
    lanes = shape[:-1]
    out = {
        "position": np.empty((n_steps,) + shape),
        "velocity": np.empty((n_steps,) + shape),
        "acceleration": np.empty((n_steps,) + shape),
        "attitude": np.empty((n_steps,) + shape),
        "rotor_speeds": np.empty((n_steps,) + lanes + (4,)),
        "wind": np.empty((n_steps,) + shape),
        "external_force": np.empty((n_steps,) + shape),
    }
    for k in range(n_steps):
        t = k * dt
        state.t = t
        wind = np.broadcast_to(wind_at(t), shape)
        p_ref, v_ref, a_ref = ref_at(t)
        u_f, att_sp, e_p = controller.command(state, integral, p_ref, v_ref, a_ref, yaw_sp, params)
        extra = None if extra_at is None else extra_at(t)
        res = step_dynamics(
            state, (u_f, att_sp), wind, model, params, dt, rng, extra, attitude_tau
        )
        out["position"][k] = state.position
        out["velocity"][k] = state.velocity
        out["acceleration"][k] = res.acceleration
        out["attitude"][k] = state.attitude
        out["rotor_speeds"][k] = res.rotor_speeds
        out["wind"][k] = wind
        out["external_force"][k] = res.external_force
        integral = integral + e_p * dt
        state = res.next_state
    return out


def _log_from_arrays(arrays, dt, meta):
    n = arrays["position"].shape[0]
    return TelemetryLog(t=np.arange(n) * dt, meta=dict(meta), **arrays)


@dataclass
class TunnelProtocol:
    """Hover-in-tunnel sweep; wind blows along inertial ``wind_axis_rad``."""

    speeds: tuple = tuple(float(v) for v in range(9))
    yaw_step_rad: float = math.radians(10.0)
    dwell_s: float = 20.0
    heading_offset_rad: float = 0.0
    wind_axis_rad: float = 0.0

    def __post_init__(self):
        if len(self.speeds) == 0:
            raise DomainError("speeds must be nonempty")
        if not self.dwell_s > 0:
            raise DomainError("dwell_s must be positive")
        if not self.yaw_step_rad > 0:
            raise DomainError("yaw_step_rad must be positive")

    @property
    def n_headings(self):
        return max(1, int(round(TWO_PI / self.yaw_step_rad)))

    def cells(self):
        """``(speed, heading)`` per dwell cell, speed-major."""
        headings = self.heading_offset_rad + np.arange(self.n_headings) * self.yaw_step_rad
        return [(float(v), float(h)) for v in self.speeds for h in headings]


def simulate_tunnel_cells(params, model, protocol=TunnelProtocol(), controller=PositionController()):
    """Simulate every dwell cell as an independent lane started from trim.

    The returned log has lane-shaped arrays ``(T, n_cells, ...)``.
    """
    cells = protocol.cells()
    speeds = np.array([c[0] for c in cells])
    yaws = np.array([c[1] for c in cells])
    axis = np.array([math.cos(protocol.wind_axis_rad), math.sin(protocol.wind_axis_rad), 0.0])
    wind = speeds[:, None] * axis
    state, integral = trim_state(params, model, wind, yaws, controller)
    n_steps = int(round(protocol.dwell_s / params.sample_dt))
    zeros = np.zeros(3)
    rng = np.random.default_rng(model.rng_seed)
    arrays = _simulate(
        params,
        model,
        n_steps,
        lambda t: wind,
        lambda t: (zeros, zeros, zeros),
        yaws,
        state,
        integral,
        rng,
        controller,
    )
    drift = np.abs(arrays["position"]).max(axis=(0, 2))
    bad = np.flatnonzero(~np.isfinite(drift) | (drift > 50.0))
    if bad.size:
        v, h = cells[bad[0]]
        raise SimulationFault(
            f"controller diverged in cell speed={v:g} m/s, yaw={math.degrees(h):g} deg"
        )
    meta = {
        "scenario": "tunnel",
        "dwell_s": protocol.dwell_s,
        "cells": len(cells),
        "sample_dt": params.sample_dt,
    }
    return _log_from_arrays(arrays, params.sample_dt, meta)


def run_wind_tunnel_scenario(
    params,
    model,
    speeds=None,
    yaw_step_rad=math.radians(10.0),
    dwell_s=20.0,
    heading_offset_rad=0.0,
    controller=PositionController(),
):
    """Full calibration sweep as one continuous log (cells in speed-major order)."""
    if speeds is None:
        speeds = TunnelProtocol.speeds
    protocol = TunnelProtocol(tuple(speeds), yaw_step_rad, dwell_s, heading_offset_rad)
    return simulate_tunnel_cells(params, model, protocol, controller).concat_lanes()


def run_flight_scenario(
    params,
    model,
    trajectory,
    wind,
    yaw_rad=None,
    controller=PositionController(),
    extra_force=None,
    duration_s=None,
):
    """Velocity-tracking flight through ``trajectory`` under ``wind``.

    ``extra_force`` is an optional callable ``t -> 3-vector`` applied on top
    of the drag (a tensiometer pull, for instance).
    """
    yaw = params.desired_yaw_rad if yaw_rad is None else yaw_rad
    duration = trajectory.duration if duration_s is None else duration_s
    n_steps = int(round(duration / params.sample_dt))
    dt = params.sample_dt
    state, integral = trim_state(params, model, wind.value(0.0), np.float64(yaw), controller)
    p_ref = np.zeros(3)

    def ref_at(t):
        nonlocal p_ref
        v_ref = trajectory.value(t)
        out = (p_ref.copy(), v_ref, trajectory.rate(t))
        p_ref = p_ref + v_ref * dt
        return out

    rng = np.random.default_rng(model.rng_seed)
    arrays = _simulate(
        params,
        model,
        n_steps,
        wind.value,
        ref_at,
        np.float64(yaw),
        state,
        integral,
        rng,
        controller,
        extra_force,
    )
    meta = {"scenario": "flight", "sample_dt": dt}
    return _log_from_arrays(arrays, dt, meta)


def run_flight_lanes(params, model, trajectories, wind, yaw_rad=None, controller=PositionController(),
                     duration_s=None):
    """Independent flights, one lane per velocity script, under a shared wind script.

    Every lane starts from trim at rest; the log is lane-shaped ``(T, N, ...)``.
    """
    trajectories = list(trajectories)
    n = len(trajectories)
    if n == 0:
        raise DomainError("need at least one trajectory")
    yaw = np.full(n, params.desired_yaw_rad if yaw_rad is None else yaw_rad, dtype=float)
    duration = max(tr.duration for tr in trajectories) if duration_s is None else duration_s
    n_steps = int(round(duration / params.sample_dt))
    dt = params.sample_dt
    state, integral = trim_state(params, model, np.tile(wind.value(0.0), (n, 1)), yaw, controller)
    p_ref = np.zeros((n, 3))

    def ref_at(t):
        nonlocal p_ref
        v_ref = np.array([tr.value(t) for tr in trajectories])
        out = (p_ref.copy(), v_ref, np.array([tr.rate(t) for tr in trajectories]))
        p_ref = p_ref + v_ref * dt
        return out

    rng = np.random.default_rng(model.rng_seed)
    arrays = _simulate(params, model, n_steps, wind.value, ref_at, yaw, state, integral, rng, controller)
    meta = {"scenario": "flight_lanes", "lanes": n, "sample_dt": dt}
    return _log_from_arrays(arrays, dt, meta)


def _legs(axis, speeds, ramp_s, hold_s, pause_s):
    segs = []
    for v in speeds:
        vec = np.asarray(axis, dtype=float) * v
        segs += [(ramp_s, vec), (hold_s, vec), (ramp_s, np.zeros(3)), (pause_s, np.zeros(3))]
    return segs


def indoor_flight_script(speed=2.0, ramp_s=4.0, hold_s=6.0, hover_s=4.0):
    """Hover, then to-and-fro, left-right and up-down legs at ``speed``."""
    segs = [(hover_s, np.zeros(3))]
    for axis in ((1, 0, 0), (0, 1, 0), (0, 0, 1)):
        segs += _legs(axis, (speed, -speed), ramp_s, hold_s, 2.0)
    return VelocityScript(segs, "linear")


def vertical_calibration_script(speeds=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0), ramp_s=3.0, hold_s=8.0):
    """Climb and descent legs at several speeds (z-down: negative is up)."""
    signed = [s for v in speeds for s in (-v, v)]
    return VelocityScript([(4.0, np.zeros(3))] + _legs((0, 0, 1), signed, ramp_s, hold_s, 2.0), "linear")


def vertical_calibration_lanes(params, model, speeds=(0.5, 1.0, 1.5, 2.0, 2.5, 3.0), ramp_s=3.0, hold_s=8.0):
    """Each climb and descent leg of the vertical calibration as its own lane, laid end to end."""
    scripts = [
        VelocityScript([(1.0, np.zeros(3)), (ramp_s, [0.0, 0.0, s]), (hold_s, [0.0, 0.0, s])], "linear")
        for v in speeds
        for s in (-v, v)
    ]
    calm = WindScript([(1.0, np.zeros(3))])
    log = run_flight_lanes(params, model, scripts, calm).concat_lanes()
    log.meta["scenario"] = "vertical"
    return log


def ramp_wind_script(peak=10.0, direction_rad=math.radians(65.0), lead_s=10.0, ramp_s=100.0, hold_s=20.0):
    """Calm air, a slow ramp up to ``peak`` m/s, then a hold."""
    u = np.array([math.cos(direction_rad), math.sin(direction_rad), 0.0])
    return WindScript([(lead_s, np.zeros(3)), (ramp_s, peak * u), (hold_s, peak * u)], "linear")


def hover_script(duration_s):
    return VelocityScript([(duration_s, np.zeros(3))])
