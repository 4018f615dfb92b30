"""Discrete external-force observer.

Per axis the estimate follows

    f_hat(k+1) = (1 - k_i) f_hat(k) + k_i (m a - m g e3 + u_f z_b),
    k_i = dt * lambda_i / (2 m),

where the bracket is the external force implied by the translational
dynamics, so the estimate converges to it geometrically with ratio
``1 - k_i`` per sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .errors import DomainError, StabilityError
from .frames import E3, body_z_axis, check_observer_stability, rotor_thrust, yaw_rotate


@dataclass
class ObserverState:
    estimate: np.ndarray
    t: float | None = None

    @classmethod
    def zeros(cls, lanes=()):
        return cls(np.zeros(tuple(lanes) + (3,)))


@dataclass
class ForceEstimate:
    f_e_inertial: np.ndarray
    f_ce_intermediate: np.ndarray
    t: float


def implied_force(accel, attitude, u_f, params):
    """External force consistent with measured motion: ``m a - m g e3 + u_f z_b``."""
    m = params.mass_kg
    z_b = body_z_axis(attitude)
    return m * np.asarray(accel) - m * params.gravity * E3 + np.asarray(u_f)[..., None] * z_b


def dob_step(obs, accel, attitude, u_f, params, dt=None, t=None):
    """One observer update; returns a new ObserverState."""
    dt = params.sample_dt if dt is None else dt
    if not dt > 0:
        raise DomainError(f"dt must be positive, got {dt}")
    check_observer_stability(params, dt)
    innov = implied_force(accel, attitude, u_f, params)
    if not (np.all(np.isfinite(innov)) and np.all(np.isfinite(obs.estimate))):
        raise DomainError("non-finite observer input")
    k = dt * params.gain_vector / (2.0 * params.mass_kg)
    est = (1.0 - k) * obs.estimate + k * innov
    return ObserverState(est, t)


def observe_log(log, params):
    """Run the observer over a whole uniformly sampled log (batch form).

    Equivalent to iterating ``dob_step`` from a zero estimate: sample ``k``
    of the result is the estimate after consuming samples ``0..k``.
    """
    u_f = rotor_thrust(log.rotor_speeds, params.thrust_coeffs).sum(axis=-1)
    innov = implied_force(log.acceleration, log.attitude, u_f, params)
    if not np.all(np.isfinite(innov)):
        raise DomainError("non-finite observer input")
    if len(log.t) > 1:
        dts = np.diff(log.t)
        dt = float(dts.mean())
        if np.ptp(dts) > 1e-9 * max(dt, 1.0):
            raise DomainError("batch observer needs uniform sampling")
    else:
        dt = params.sample_dt
    check_observer_stability(params, dt)
    out = np.empty_like(innov)
    for i, lam in enumerate(params.observer_gain):
        k = dt * lam / (2.0 * params.mass_kg)
        out[..., i] = lfilter([k], [1.0, -(1.0 - k)], innov[..., i], axis=0)
    return out


def convergence_time_constant(params):
    """Per-axis time constant (s) of the discrete observer, ``-dt / ln(1 - k_i)``.

    Approaches ``2 m / lambda_i`` for small steps.  Gains with ``k_i >= 1``
    (oscillating or slower than one sample) have no exponential time constant.
    """
    check_observer_stability(params)
    k = params.observer_step_gain
    if np.any(k >= 1.0):
        raise StabilityError(f"observer step gain {k.max():.4g} >= 1 has no time constant")
    return -params.sample_dt / np.log1p(-k)


def warmup_time(params, n_tau=5.0):
    return n_tau * float(np.max(convergence_time_constant(params)))


def to_intermediate(f_e_inertial, psi_d):
    """Express an inertial vector in the intermediate (yawed) frame."""
    return yaw_rotate(f_e_inertial, psi_d, inverse=True)
