import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dobwind.errors import DomainError, StabilityError
from dobwind.frames import (
    UavParams,
    body_z_axis,
    check_observer_stability,
    default_observer_gain,
    rotation_body_to_inertial,
    rotation_intermediate_to_inertial,
    rpm_from_thrust,
    thrust_from_rpm,
    wrap_angle,
    yaw_rotate,
)

angles = st.floats(-10.0, 10.0, allow_nan=False)
unit = st.floats(0.0, 1.0)


def _rx(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[1, 0, 0], [0, c, -s], [0, s, c]])


def _ry(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0, s], [0, 1, 0], [-s, 0, c]])


def _rz(a):
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])


def test_thrust_at_idle_and_full():
    p = UavParams()
    assert thrust_from_rpm(np.zeros(4), p) == pytest.approx(0.0526, abs=1e-12)
    assert thrust_from_rpm(np.ones(4), p) == pytest.approx(873.4126, abs=1e-9)


def test_hover_rotor_speed():
    p = UavParams()
    omega = rpm_from_thrust(p.mass_kg * p.gravity, p)
    assert omega == pytest.approx(np.full(4, 0.2816), abs=1e-4)
    assert thrust_from_rpm(omega, p) == pytest.approx(78.48, abs=1e-9)


def test_thrust_domain_error_names_rotor():
    with pytest.raises(DomainError, match=r"omega\[2\]"):
        thrust_from_rpm([0.1, 0.2, 1.5, 0.3], UavParams())
    with pytest.raises(DomainError, match=r"omega\[0\]"):
        thrust_from_rpm([-0.01, 0.2, 0.5, 0.3], UavParams())


@given(st.lists(unit, min_size=4, max_size=4), st.integers(0, 3), unit)
def test_thrust_monotone_per_rotor(omega, i, bump):
    p = UavParams()
    lo = np.array(omega)
    hi = lo.copy()
    hi[i] = max(hi[i], bump)
    assert thrust_from_rpm(hi, p) >= thrust_from_rpm(lo, p)


@given(st.floats(0.06, 870.0))
def test_rpm_round_trip(u_f):
    p = UavParams()
    assert thrust_from_rpm(rpm_from_thrust(u_f, p), p) == pytest.approx(u_f, rel=1e-10)


@given(angles, angles, angles)
def test_rotation_matches_composed_axes(roll, pitch, yaw):
    R = rotation_body_to_inertial([roll, pitch, yaw])
    ref = _rz(yaw) @ _ry(pitch) @ _rx(roll)
    np.testing.assert_allclose(R, ref, atol=1e-12)
    np.testing.assert_allclose(body_z_axis([roll, pitch, yaw]), ref[:, 2], atol=1e-12)


def test_rotation_examples():
    np.testing.assert_allclose(rotation_body_to_inertial([0, 0, 0]), np.eye(3))
    R = rotation_body_to_inertial([0, 0, math.pi / 2])
    np.testing.assert_allclose(R @ [1, 0, 0], [0, 1, 0], atol=1e-15)
    Rc = rotation_intermediate_to_inertial(math.pi)
    np.testing.assert_allclose(Rc @ [1, 2, 3], [-1, -2, 3], atol=1e-15)
    np.testing.assert_allclose(rotation_intermediate_to_inertial(0.0), np.eye(3))


@given(angles)
def test_intermediate_inverse(psi):
    prod = rotation_intermediate_to_inertial(psi) @ rotation_intermediate_to_inertial(-psi)
    np.testing.assert_allclose(prod, np.eye(3), atol=1e-12)


def test_orthonormal_batch(rng):
    eta = rng.uniform(-math.pi, math.pi, size=(20000, 3))
    R = rotation_body_to_inertial(eta)
    err = np.abs(np.einsum("nji,njk->nik", R, R) - np.eye(3)).max()
    assert err < 1e-12
    assert np.abs(np.linalg.det(R) - 1).max() < 1e-12


@given(st.lists(st.floats(-50, 50), min_size=3, max_size=3), angles)
def test_yaw_rotate_matches_matrix(v, psi):
    Rc = rotation_intermediate_to_inertial(psi)
    np.testing.assert_allclose(yaw_rotate(v, psi), Rc @ v, atol=1e-12)
    np.testing.assert_allclose(yaw_rotate(v, psi, inverse=True), Rc.T @ v, atol=1e-12)


@given(st.floats(-100, 100))
def test_wrap_angle_range(a):
    w = float(wrap_angle(a))
    assert -math.pi < w <= math.pi
    assert math.isclose(math.cos(w), math.cos(a), abs_tol=1e-9)
    assert math.isclose(math.sin(w), math.sin(a), abs_tol=1e-9)


def test_wrap_angle_boundary():
    assert wrap_angle(-math.pi) == math.pi
    assert wrap_angle(math.pi) == math.pi


def test_default_gain_and_validation():
    p = UavParams()
    assert p.observer_gain == default_observer_gain(8.0)
    assert p.observer_gain[0] == pytest.approx(2 * 8.0 / 0.3)
    with pytest.raises(DomainError):
        UavParams(mass_kg=0.0)
    with pytest.raises(DomainError):
        UavParams(sample_dt=-0.01)
    with pytest.raises(DomainError):
        UavParams(euler_order="xyz")


def test_stability_boundary():
    # dt * lambda / (2m) = 2 is the first unstable gain
    with pytest.raises(StabilityError, match="axis 1"):
        UavParams(observer_gain=(1.0, 3200.0, 1.0))
    UavParams(observer_gain=(1.0, 3199.0, 1.0))
    with pytest.raises(StabilityError, match="positive"):
        UavParams(observer_gain=(1.0, 0.0, 1.0))
    p = UavParams(observer_gain=(100.0, 100.0, 100.0))
    with pytest.raises(StabilityError):
        check_observer_stability(p, dt=0.5)
