"""Vehicle parameters, state containers, frame rotations and the thrust curve.

Frame conventions used throughout the package:

* inertial frame is z-down (gravity is ``+g * e3``, thrust acts along ``-z_b``)
* attitude ``eta = (roll, pitch, yaw)`` in radians, composed as
  ``R = Rz(yaw) @ Ry(pitch) @ Rx(roll)`` (body to inertial)
* the intermediate frame is the inertial frame yawed by the desired yaw

All functions accept a trailing vector axis and broadcast over any leading
axes, so a batch of independent vehicles can be handled as an ``(N, 3)`` array.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, StabilityError

E3 = np.array([0.0, 0.0, 1.0])

# Motor revolution-thrust polynomial per rotor, normalized RPM -> N.
DEFAULT_THRUST_COEFFS = (207.0, 11.34, 0.01315)
DEFAULT_MASS_KG = 8.0

EULER_ORDERS = ("zyx",)


def default_observer_gain(mass_kg, time_constant_s=0.3):
    """Diagonal observer gain giving a continuous time constant per axis."""
    lam = 2.0 * mass_kg / time_constant_s
    return (lam, lam, lam)


@dataclass(frozen=True)
class UavParams:
    mass_kg: float = DEFAULT_MASS_KG
    gravity: float = 9.81
    thrust_coeffs: tuple = DEFAULT_THRUST_COEFFS
    # None -> per-axis gain for a 0.3 s observer time constant
    observer_gain: tuple | None = None
    desired_yaw_rad: float = 0.0
    sample_dt: float = 0.01
    euler_order: str = "zyx"

    def __post_init__(self):
        if not self.mass_kg > 0:
            raise DomainError(f"mass_kg must be positive, got {self.mass_kg}")
        if not self.sample_dt > 0:
            raise DomainError(f"sample_dt must be positive, got {self.sample_dt}")
        if self.euler_order not in EULER_ORDERS:
            raise DomainError(f"unsupported euler_order {self.euler_order!r}")
        if len(self.thrust_coeffs) != 3:
            raise DomainError("thrust_coeffs needs exactly three values (a, b, c)")
        object.__setattr__(self, "thrust_coeffs", tuple(float(c) for c in self.thrust_coeffs))
        gain = self.observer_gain
        if gain is None:
            gain = default_observer_gain(self.mass_kg)
        gain = tuple(float(g) for g in gain)
        if len(gain) != 3:
            raise DomainError("observer_gain needs three diagonal entries")
        object.__setattr__(self, "observer_gain", gain)
        check_observer_stability(self)

    @property
    def gain_vector(self):
        return np.asarray(self.observer_gain)

    @property
    def observer_step_gain(self):
        """Per-axis factor ``dt * lambda / (2 m)`` of the discrete observer."""
        return self.sample_dt * self.gain_vector / (2.0 * self.mass_kg)

    @property
    def hover_thrust(self):
        return self.mass_kg * self.gravity

    @property
    def thrust_limits(self):
        a, b, c = self.thrust_coeffs
        return 4.0 * c, 4.0 * (a + b + c)


def check_observer_stability(params, dt=None):
    """Raise StabilityError unless every observer pole sits inside the unit circle.

    Requires ``lambda_i > 0`` and ``dt * lambda_i / (2 m) < 2`` per axis.
    """
    dt = params.sample_dt if dt is None else dt
    for i, lam in enumerate(params.observer_gain):
        if not lam > 0:
            raise StabilityError(f"observer gain axis {i} must be positive, got {lam}")
        k = dt * lam / (2.0 * params.mass_kg)
        if not k < 2.0:
            raise StabilityError(
                f"observer axis {i} unstable: dt*lambda/(2m) = {k:.6g} >= 2"
            )


@dataclass
class UavState:
    """Kinematic state in the inertial frame plus normalized rotor speeds.

    Vector fields carry a trailing axis of length 3 (4 for rotor speeds) and
    may carry leading batch axes.
    """

    t: float
    position: np.ndarray = field(default_factory=lambda: np.zeros(3))
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    acceleration: np.ndarray = field(default_factory=lambda: np.zeros(3))
    attitude: np.ndarray = field(default_factory=lambda: np.zeros(3))
    rotor_speeds: np.ndarray = field(default_factory=lambda: np.zeros(4))

    def copy(self):
        return UavState(
            self.t,
            np.array(self.position, dtype=float),
            np.array(self.velocity, dtype=float),
            np.array(self.acceleration, dtype=float),
            np.array(self.attitude, dtype=float),
            np.array(self.rotor_speeds, dtype=float),
        )


def rotor_thrust(omega, coeffs=DEFAULT_THRUST_COEFFS):
    a, b, c = coeffs
    omega = np.asarray(omega, dtype=float)
    return (a * omega + b) * omega + c


def thrust_from_rpm(omega, params):
    """Total thrust (N) from four normalized rotor speeds.

    Raises DomainError naming the first rotor whose speed is outside [0, 1].
    """
    omega = np.asarray(omega, dtype=float)
    if omega.shape[-1] != 4:
        raise DomainError(f"expected 4 rotor speeds, got shape {omega.shape}")
    bad = ~((omega >= 0.0) & (omega <= 1.0))
    if bad.any():
        idx = np.argwhere(bad)[0]
        rotor = int(idx[-1])
        raise DomainError(
            f"rotor speed omega[{rotor}] = {omega[tuple(idx)]!r} outside [0, 1]"
        )
    return rotor_thrust(omega, params.thrust_coeffs).sum(axis=-1)


def rpm_from_thrust(u_f, params):
    """Invert the thrust curve, sharing ``u_f`` equally over four rotors.

    Uses the positive root; demands below the idle thrust map to zero speed and
    demands above full thrust saturate at one.
    """
    a, b, c = params.thrust_coeffs
    per_rotor = np.asarray(u_f, dtype=float) / 4.0
    disc = b * b - 4.0 * a * (c - per_rotor)
    root = (-b + np.sqrt(np.maximum(disc, 0.0))) / (2.0 * a)
    root = np.clip(root, 0.0, 1.0)
    return np.repeat(root[..., None], 4, axis=-1)


def rotation_body_to_inertial(eta):
    """Z-Y-X rotation matrix ``R(eta)`` with shape ``(..., 3, 3)``."""
    eta = np.asarray(eta, dtype=float)
    cr, sr = np.cos(eta[..., 0]), np.sin(eta[..., 0])
    cp, sp = np.cos(eta[..., 1]), np.sin(eta[..., 1])
    cy, sy = np.cos(eta[..., 2]), np.sin(eta[..., 2])
    R = np.empty(eta.shape[:-1] + (3, 3))
    R[..., 0, 0] = cy * cp
    R[..., 0, 1] = cy * sp * sr - sy * cr
    R[..., 0, 2] = cy * sp * cr + sy * sr
    R[..., 1, 0] = sy * cp
    R[..., 1, 1] = sy * sp * sr + cy * cr
    R[..., 1, 2] = sy * sp * cr - cy * sr
    R[..., 2, 0] = -sp
    R[..., 2, 1] = cp * sr
    R[..., 2, 2] = cp * cr
    return R


def body_z_axis(eta):
    """Third column of ``R(eta)``, the body z axis in inertial coordinates."""
    eta = np.asarray(eta, dtype=float)
    cr, sr = np.cos(eta[..., 0]), np.sin(eta[..., 0])
    cp, sp = np.cos(eta[..., 1]), np.sin(eta[..., 1])
    cy, sy = np.cos(eta[..., 2]), np.sin(eta[..., 2])
    return np.stack(
        [cy * sp * cr + sy * sr, sy * sp * cr - cy * sr, cp * cr], axis=-1
    )


def rotation_intermediate_to_inertial(psi_d):
    """Rotation ``R_c`` about inertial z by ``psi_d``; shape ``(..., 3, 3)``."""
    psi_d = np.asarray(psi_d, dtype=float)
    c, s = np.cos(psi_d), np.sin(psi_d)
    R = np.zeros(psi_d.shape + (3, 3))
    R[..., 0, 0] = c
    R[..., 0, 1] = -s
    R[..., 1, 0] = s
    R[..., 1, 1] = c
    R[..., 2, 2] = 1.0
    return R


def yaw_rotate(vec, psi, inverse=False):
    """Apply ``R_c(psi)`` (or its transpose) to vectors without building matrices."""
    vec = np.asarray(vec, dtype=float)
    psi = np.asarray(psi, dtype=float)
    c, s = np.cos(psi), np.sin(psi)
    if inverse:
        s = -s
    x, y = vec[..., 0], vec[..., 1]
    return np.stack([c * x - s * y, s * x + c * y, vec[..., 2]], axis=-1)


def wrap_angle(angle):
    """Wrap to (-pi, pi]."""
    wrapped = np.mod(np.asarray(angle, dtype=float) + math.pi, 2.0 * math.pi) - math.pi
    return np.where(wrapped == -math.pi, math.pi, wrapped)
