"""Streaming wind estimator.

Each telemetry sample passes through: thrust from rotor speeds, the force
observer, rotation into the intermediate frame, a gain-scheduled low-pass
filter, the force-air model, rotation back to the inertial frame, and the
wind triangle.  Everything is causal: one sample in, one estimate out.

Sign of the ground vector: the force-air model returns the airflow felt by
the vehicle, ``wind - velocity``.  The triangle is applied as written,
``A_w = A_r - A_g``, with ``A_g = ground_sign * velocity``; ``ground_sign``
is -1, the value picked by ``select_ground_sign`` on calm-air flight.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.signal import lfilter

from .airmodel import LOW_FORCE_N, predict_relative_air
from .dob import ObserverState, dob_step, implied_force, to_intermediate, warmup_time
from .errors import DomainError
from .frames import check_observer_stability, thrust_from_rpm, yaw_rotate
from .telemetry import CONFIDENCE_CODES, EstimateLog

OK, LOW, WARMUP = range(3)


@dataclass(frozen=True)
class FilterSchedule:
    """Cutoff ``f_low`` at or below ``v_low``, ``f_high`` at or above ``v_high``."""

    f_low: float = 0.5
    f_high: float = 1.5
    v_low: float = 1.0
    v_high: float = 6.0
    slew_hz_per_s: float = 1.0

    def __post_init__(self):
        if not 0 < self.f_low <= self.f_high:
            raise DomainError("need 0 < f_low <= f_high")
        if not self.v_low < self.v_high:
            raise DomainError("need v_low < v_high")
        if not self.slew_hz_per_s > 0:
            raise DomainError("slew limit must be positive")

    def check(self, dt):
        limit = 0.5 / (math.pi * dt)
        if self.f_high > limit:
            raise DomainError(f"f_high={self.f_high} Hz above {limit:.4g} Hz for dt={dt}")

    def target(self, speed):
        return np.interp(speed, (self.v_low, self.v_high), (self.f_low, self.f_high))

    @classmethod
    def fixed(cls, cutoff):
        return cls(cutoff, cutoff)


@dataclass
class FilterState:
    output: np.ndarray
    cutoff: np.ndarray
    schedule: FilterSchedule = FilterSchedule()

    @classmethod
    def initial(cls, schedule=FilterSchedule(), lanes=()):
        lanes = tuple(lanes)
        return cls(np.zeros(lanes + (3,)), np.full(lanes, schedule.f_low), schedule)


def filter_step(fs, raw_force, speed_hint, dt):
    """Slew the cutoff toward its scheduled value, then apply one low-pass step."""
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    sched = fs.schedule
    target = sched.target(speed_hint)
    max_change = sched.slew_hz_per_s * dt
    cutoff = fs.cutoff + np.clip(target - fs.cutoff, -max_change, max_change)
    cutoff = np.clip(cutoff, sched.f_low, sched.f_high)
    alpha = -np.expm1(-2.0 * math.pi * cutoff * dt)
    out = fs.output + alpha[..., None] * (np.asarray(raw_force) - fs.output)
    return FilterState(out, cutoff, sched), out


@dataclass
class WindEstimate:
    t: float
    wind_vector: np.ndarray
    vwh: np.ndarray
    vwv: np.ndarray
    theta_w: np.ndarray
    confidence: np.ndarray | int = OK

    @property
    def label(self):
        return np.asarray(CONFIDENCE_CODES, dtype=object)[self.confidence]


def wind_triangle(a_r, a_g):
    """Wind vector from relative-air and ground vectors: ``A_r - A_g``."""
    return np.asarray(a_r, dtype=float) - np.asarray(a_g, dtype=float)


def extract_wind(a_w, t, calm=1e-12):
    """Horizontal/vertical speed and heading in (-pi, pi]; calm air is flagged."""
    a_w = np.asarray(a_w, dtype=float)
    vwh = np.hypot(a_w[..., 0], a_w[..., 1])
    theta = np.arctan2(a_w[..., 1], a_w[..., 0])
    theta = np.where(theta == -math.pi, math.pi, theta)
    conf = np.where(vwh <= calm, LOW, OK)
    if conf.ndim == 0:
        conf = int(conf)
    return WindEstimate(t, a_w, vwh, a_w[..., 2].copy(), theta, conf)


@dataclass(frozen=True)
class PipelineConfig:
    schedule: FilterSchedule = FilterSchedule()
    ground_sign: float = -1.0
    # "measured": intermediate frame follows the logged yaw; "fixed": params.desired_yaw_rad
    yaw_source: str = "measured"
    low_force_n: float = LOW_FORCE_N
    warmup_tau: float = 5.0

    def __post_init__(self):
        if self.yaw_source not in ("measured", "fixed"):
            raise DomainError(f"unknown yaw_source {self.yaw_source!r}")
        if self.ground_sign not in (1.0, -1.0):
            raise DomainError("ground_sign must be +1 or -1")


@dataclass
class PipelineState:
    observer: ObserverState
    filter: FilterState
    model: object
    params: object
    config: PipelineConfig = PipelineConfig()
    t_start: float | None = None
    last_vwh: np.ndarray = field(default_factory=lambda: np.zeros(()))
    warmup_s: float = 0.0

    @classmethod
    def initial(cls, model, params, config=PipelineConfig(), lanes=()):
        config.schedule.check(params.sample_dt)
        lanes = tuple(lanes)
        return cls(
            ObserverState.zeros(lanes),
            FilterState.initial(config.schedule, lanes),
            model,
            params,
            config,
            None,
            np.zeros(lanes),
            warmup_time(params, config.warmup_tau),
        )


def estimate_step(ps, sample):
    """Consume one telemetry sample (``UavState``); return the new state and estimate."""
    params = ps.params
    cfg = ps.config
    t_prev = ps.observer.t
    if t_prev is not None and not sample.t > t_prev:
        raise DomainError(f"timestamp {sample.t!r} does not follow {t_prev!r}")
    dt = params.sample_dt if t_prev is None else sample.t - t_prev
    u_f = thrust_from_rpm(sample.rotor_speeds, params)
    obs = dob_step(ps.observer, sample.acceleration, sample.attitude, u_f, params, dt, sample.t)
    if cfg.yaw_source == "measured":
        psi = np.asarray(sample.attitude)[..., 2]
    else:
        psi = params.desired_yaw_rad
    f_ce = to_intermediate(obs.estimate, psi)
    filt, f_smooth = filter_step(ps.filter, f_ce, ps.last_vwh, dt)
    pred = predict_relative_air(f_smooth, ps.model, cfg.low_force_n)
    a_r = yaw_rotate(pred.a_rc, psi)
    a_w = wind_triangle(a_r, cfg.ground_sign * np.asarray(sample.velocity))
    est = extract_wind(a_w, sample.t)
    t_start = sample.t if ps.t_start is None else ps.t_start
    conf = np.where(pred.low_confidence, LOW, est.confidence)
    if sample.t - t_start < ps.warmup_s:
        conf = np.full_like(conf, WARMUP)
    est.confidence = int(conf) if np.ndim(conf) == 0 else conf
    new = replace(ps, observer=obs, filter=filt, t_start=t_start, last_vwh=est.vwh)
    return new, est


def estimate_log(log, model, params, config=PipelineConfig()):
    """Run the estimator over a whole log.

    Single streams take a batch route (vectorized observer and force-air
    mapping, with only the scheduled filter iterated sample by sample) that
    matches ``estimate_step`` to rounding.  Lane-shaped logs run as
    parallel streams through ``estimate_step``.
    """
    lanes = log.position.shape[1:-1]
    if not lanes:
        return _estimate_stream(log, model, params, config)
    ps = PipelineState.initial(model, params, config, lanes)
    n = len(log)
    wind = np.empty(log.velocity.shape)
    vwh = np.empty((n,) + lanes)
    vwv = np.empty((n,) + lanes)
    theta = np.empty((n,) + lanes)
    conf = np.empty((n,) + lanes, dtype=np.int8)
    for k in range(n):
        ps, est = estimate_step(ps, log.state(k))
        wind[k] = est.wind_vector
        vwh[k] = est.vwh
        vwv[k] = est.vwv
        theta[k] = est.theta_w
        conf[k] = est.confidence
    labels = np.asarray(CONFIDENCE_CODES, dtype=object)[conf]
    return EstimateLog(log.t.copy(), wind, vwh, vwv, theta, labels)


def _observer_series(innov, dts, params):
    k = dts[:, None] * params.gain_vector / (2.0 * params.mass_kg)
    if np.ptp(dts) <= 1e-9 * dts[0]:
        return np.stack(
            [lfilter([k[0, i]], [1.0, -(1.0 - k[0, i])], innov[:, i]) for i in range(3)],
            axis=-1,
        )
    out = np.empty_like(innov)
    est = np.zeros(3)
    for j in range(len(innov)):
        est = (1.0 - k[j]) * est + k[j] * innov[j]
        out[j] = est
    return out


def _estimate_stream(log, model, params, config):
    n = len(log)
    if n == 0:
        empty = np.empty(0)
        return EstimateLog(empty, np.empty((0, 3)), empty, empty, empty, np.empty(0, dtype=object))
    t = log.t
    if n > 1 and not np.all(np.diff(t) > 0):
        raise DomainError("timestamps must be strictly increasing")
    dts = np.concatenate([[params.sample_dt], np.diff(t)])
    for dt in (dts.min(), dts.max()):
        check_observer_stability(params, dt)
    config.schedule.check(params.sample_dt)
    u_f = thrust_from_rpm(log.rotor_speeds, params)
    innov = implied_force(log.acceleration, log.attitude, u_f, params)
    if not np.all(np.isfinite(innov)):
        raise DomainError("non-finite observer input")
    f_hat = _observer_series(innov, dts, params)
    if config.yaw_source == "measured":
        psi = log.attitude[:, 2].copy()
    else:
        psi = np.full(n, float(params.desired_yaw_rad))
    f_ce = to_intermediate(f_hat, psi)
    smooth = _scheduled_filter(f_ce, psi, log.velocity, dts, model, config)
    pred = predict_relative_air(smooth, model, config.low_force_n)
    a_w = wind_triangle(yaw_rotate(pred.a_rc, psi), config.ground_sign * log.velocity)
    est = extract_wind(a_w, t)
    conf = np.where(pred.low_confidence, LOW, est.confidence)
    conf = np.where(t - t[0] < warmup_time(params, config.warmup_tau), WARMUP, conf)
    labels = np.asarray(CONFIDENCE_CODES, dtype=object)[conf]
    return EstimateLog(t.copy(), a_w, est.vwh, est.vwv, est.theta_w, labels)


def _scheduled_filter(f_ce, psi, velocity, dts, model, config):
    """Scalar loop of ``filter_step`` fed by the previous horizontal wind speed."""
    sched = config.schedule
    c0, cm, cn, cmm, cnn = model.horizontal_coeffs
    gs = config.ground_sign
    f_lo, f_hi, v_lo, v_hi = sched.f_low, sched.f_high, sched.v_low, sched.v_high
    out = np.empty_like(f_ce)
    y0 = y1 = y2 = 0.0
    cutoff = f_lo
    hint = 0.0
    two_pi = 2.0 * math.pi
    expm1, cos, sin, hypot, atan2 = math.expm1, math.cos, math.sin, math.hypot, math.atan2
    rows = f_ce.tolist()
    vel = velocity.tolist()
    cpsi = np.cos(psi).tolist()
    spsi = np.sin(psi).tolist()
    for k, dt in enumerate(dts.tolist()):
        if hint <= v_lo:
            target = f_lo
        elif hint >= v_hi:
            target = f_hi
        else:
            target = f_lo + (hint - v_lo) * (f_hi - f_lo) / (v_hi - v_lo)
        step = sched.slew_hz_per_s * dt
        cutoff += min(max(target - cutoff, -step), step)
        cutoff = min(max(cutoff, f_lo), f_hi)
        alpha = -expm1(-two_pi * cutoff * dt)
        x0, x1, x2 = rows[k]
        y0 += alpha * (x0 - y0)
        y1 += alpha * (x1 - y1)
        y2 += alpha * (x2 - y2)
        out[k] = (y0, y1, y2)
        f_h = hypot(y0, y1)
        if f_h > 0:
            th = atan2(y1, y0)
            m = f_h * cos(th)
            nn = f_h * sin(th)
            speed = max(c0 + cm * m + cn * nn + cmm * m * m + cnn * nn * nn, 0.0)
            ax, ay = speed * cos(th), speed * sin(th)
        else:
            ax = ay = 0.0
        c, s_ = cpsi[k], spsi[k]
        vx, vy, _ = vel[k]
        hint = hypot(c * ax - s_ * ay - gs * vx, s_ * ax + c * ay - gs * vy)
    return out


def select_ground_sign(calm_log, model, params, config=PipelineConfig()):
    """Pick the ground-vector sign under which calm-air flight reports no wind.

    Returns ``(sign, {sign: mean wind magnitude after warm-up})``.
    """
    scores = {}
    for sign in (1.0, -1.0):
        est = estimate_log(calm_log, model, params, replace(config, ground_sign=sign))
        keep = est.confidence != "warmup"
        scores[sign] = float(np.linalg.norm(est.wind[keep], axis=-1).mean())
    return min(scores, key=scores.get), scores
