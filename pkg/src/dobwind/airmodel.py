"""Force-air model: fitting and inverting the force -> relative-air map.

Horizontally the relative airspeed is a quadratic surface in the force
components ``m = f_h cos(theta_r)``, ``n = f_h sin(theta_r)``::

    V_wh = c0 + c_m m + c_n n + c_mm m**2 + c_nn n**2

and the airflow direction is taken to be the force direction ``theta_r``.
Vertically the airspeed is an odd polynomial of the vertical force on the
basis ``(f, f|f|, f**3)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.spatial import cKDTree

from .dob import observe_log, to_intermediate, warmup_time
from .errors import DomainError, FitError, ParseError

# Coefficients identified on the physical barrel airframe; shown beside simulator fits.
REFERENCE_HORIZONTAL_COEFFS = (0.90, 0.06, 0.16, 0.09, 0.07)
HORIZONTAL_TERMS = ("1", "m", "n", "m^2", "n^2")
VERTICAL_TERMS = ("f", "f|f|", "f^3")
LOW_FORCE_N = 0.5


@dataclass(frozen=True)
class CalibrationPoint:
    f_ce: np.ndarray
    relative_air: np.ndarray
    weight: float = 1.0

    def __post_init__(self):
        if not self.weight >= 0:
            raise DomainError(f"weight must be non-negative, got {self.weight}")


def _stack(points):
    f = np.array([p.f_ce for p in points], dtype=float).reshape(-1, 3)
    a = np.array([p.relative_air for p in points], dtype=float).reshape(-1, 3)
    w = np.array([p.weight for p in points], dtype=float)
    return f, a, w


def force_polar_components(f_ce):
    """Force angle in (-pi, pi] and horizontal magnitude; angle 0 at zero force."""
    f_ce = np.asarray(f_ce, dtype=float)
    theta = np.arctan2(f_ce[..., 1], f_ce[..., 0])
    theta = np.where(theta == -math.pi, math.pi, theta)
    return theta, np.hypot(f_ce[..., 0], f_ce[..., 1])


def horizontal_basis(m, n):
    m = np.asarray(m, dtype=float)
    n = np.asarray(n, dtype=float)
    return np.stack([np.ones_like(m), m, n, m * m, n * n], axis=-1)


def vertical_basis(f):
    f = np.asarray(f, dtype=float)
    return np.stack([f, f * np.abs(f), f ** 3], axis=-1)


class LinearFit(NamedTuple):
    coeffs: np.ndarray
    residual_rms: float
    std_errors: np.ndarray
    n_points: int


def _least_squares(A, y, w, terms):
    """Weighted LS with rank check; unit weights make it ordinary LS."""
    sw = np.sqrt(w)
    Aw = A * sw[:, None]
    yw = y * sw
    scale = np.linalg.norm(Aw, axis=0)
    scale[scale == 0] = 1.0
    _, s, vt = np.linalg.svd(Aw / scale, full_matrices=False)
    tol = s.max() * max(Aw.shape) * np.finfo(float).eps * 1e3 if s.size else 0.0
    deficient = s <= tol
    if deficient.any() or len(s) < A.shape[1]:
        dirs = []
        for row in vt[deficient]:
            j = np.argsort(-np.abs(row))[:2]
            dirs.append(" ~ ".join(terms[i] for i in sorted(j)))
        raise FitError(f"rank-deficient normal system; degenerate directions: {'; '.join(dirs) or 'all'}")
    coeffs, *_ = np.linalg.lstsq(Aw, yw, rcond=None)
    resid = y - A @ coeffs
    wsum = w.sum()
    rms = float(np.sqrt(np.sum(w * resid ** 2) / wsum)) if wsum > 0 else 0.0
    dof = max(len(y) - A.shape[1], 1)
    sigma2 = np.sum(w * resid ** 2) / dof
    cov = sigma2 * np.linalg.inv(Aw.T @ Aw)
    return LinearFit(coeffs, rms, np.sqrt(np.diag(cov)), len(y))


def fit_horizontal_model(points):
    """Least-squares fit of the quadratic force-air surface to calibration points."""
    f, a, w = _stack(points)
    if len(f) < 5:
        raise FitError(f"need at least 5 points, got {len(f)}")
    theta, f_h = force_polar_components(f)
    speed = np.hypot(a[:, 0], a[:, 1])
    moving = f_h > 0
    if len(np.unique(np.round(theta[moving], 9))) < 3:
        raise FitError("points must span at least 3 distinct force angles")
    if len(np.unique(np.round(speed, 9))) < 2:
        raise FitError("points must span at least 2 distinct airspeeds")
    m, n = f[:, 0], f[:, 1]
    return _least_squares(horizontal_basis(m, n), speed, w, HORIZONTAL_TERMS)


def fit_vertical_model(points):
    """Least-squares fit of the odd vertical map ``V_wv(f_cez)``."""
    f, a, w = _stack(points)
    fz = f[:, 2]
    if len(np.unique(fz)) < 3:
        raise FitError("need at least 3 distinct vertical forces")
    if not ((fz > 0).any() and (fz < 0).any()):
        raise FitError("vertical forces must span both signs")
    return _least_squares(vertical_basis(fz), a[:, 2], w, VERTICAL_TERMS)


def evaluate_horizontal(coeffs, m, n):
    """Horizontal airspeed from the surface, clamped at zero."""
    coeffs = getattr(coeffs, "horizontal_coeffs", coeffs)
    return np.maximum(horizontal_basis(m, n) @ np.asarray(coeffs, dtype=float), 0.0)


def evaluate_vertical(coeffs, f_cez):
    coeffs = getattr(coeffs, "vertical_coeffs", coeffs)
    return vertical_basis(f_cez) @ np.asarray(coeffs, dtype=float)


@dataclass(frozen=True)
class ForceAirModel:
    horizontal_coeffs: tuple
    vertical_coeffs: tuple = (0.0, 0.0, 0.0)
    horizontal_rms: float = 0.0
    vertical_rms: float = 0.0
    force_envelope: tuple = (0.0, math.inf)
    conventions: dict = field(default_factory=lambda: {
        "frame": "intermediate", "z_axis": "down", "euler": "zyx",
        "direction": "force_angle", "units": "N->m/s",
    })

    def __post_init__(self):
        if len(self.horizontal_coeffs) != 5 or len(self.vertical_coeffs) != 3:
            raise DomainError("model needs 5 horizontal and 3 vertical coefficients")
        object.__setattr__(self, "horizontal_coeffs", tuple(float(c) for c in self.horizontal_coeffs))
        object.__setattr__(self, "vertical_coeffs", tuple(float(c) for c in self.vertical_coeffs))

    @property
    def fit_residual_rms(self):
        return self.horizontal_rms

    @classmethod
    def reference(cls):
        return cls(REFERENCE_HORIZONTAL_COEFFS)

    def to_text(self):
        lines = ["# force-air model"]
        for name, c in zip(("c0", "c_m", "c_n", "c_mm", "c_nn"), self.horizontal_coeffs):
            lines.append(f"{name}={c:.17g}")
        for name, c in zip(("v1", "v2", "v3"), self.vertical_coeffs):
            lines.append(f"{name}={c:.17g}")
        lines.append(f"horizontal_rms={self.horizontal_rms:.17g}")
        lines.append(f"vertical_rms={self.vertical_rms:.17g}")
        lines.append(f"envelope_min_fh={self.force_envelope[0]:.17g}")
        lines.append(f"envelope_max_fh={self.force_envelope[1]:.17g}")
        for key in sorted(self.conventions):
            lines.append(f"convention.{key}={self.conventions[key]}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        values = {}
        conventions = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError("expected key=value", line=lineno)
            key, _, value = (s.strip() for s in line.partition("="))
            if key.startswith("convention."):
                conventions[key[len("convention."):]] = value
                continue
            try:
                values[key] = float(value)
            except ValueError:
                raise ParseError(f"not a number: {value!r}", line=lineno, column=key) from None
        required = ("c0", "c_m", "c_n", "c_mm", "c_nn")
        missing = [k for k in required if k not in values]
        if missing:
            raise ParseError(f"model file missing keys: {', '.join(missing)}")
        kwargs = {}
        if conventions:
            kwargs["conventions"] = conventions
        return cls(
            tuple(values[k] for k in required),
            tuple(values.get(k, 0.0) for k in ("v1", "v2", "v3")),
            values.get("horizontal_rms", 0.0),
            values.get("vertical_rms", 0.0),
            (values.get("envelope_min_fh", 0.0), values.get("envelope_max_fh", math.inf)),
            **kwargs,
        )

    def save(self, path):
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_text())

    @classmethod
    def load(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_text(fh.read())


class RelativeAirPrediction(NamedTuple):
    a_rc: np.ndarray
    speed: np.ndarray
    low_confidence: np.ndarray


def predict_relative_air(f_ce, model, low_force=LOW_FORCE_N):
    """Relative airflow (m/s, intermediate frame) implied by an intermediate-frame force.

    At exactly zero horizontal force the direction is undefined: the
    horizontal components are zero while ``speed`` still reports the surface
    value.  Horizontal forces below ``low_force`` are flagged.
    """
    f_ce = np.asarray(f_ce, dtype=float)
    theta, f_h = force_polar_components(f_ce)
    m = f_h * np.cos(theta)
    n = f_h * np.sin(theta)
    speed = evaluate_horizontal(model, m, n)
    has_dir = f_h > 0
    ax = np.where(has_dir, speed * np.cos(theta), 0.0)
    ay = np.where(has_dir, speed * np.sin(theta), 0.0)
    az = evaluate_vertical(model, f_ce[..., 2])
    return RelativeAirPrediction(np.stack([ax, ay, az], axis=-1), speed, f_h < low_force)


def knn_scores(features, k):
    """Mean distance of each row to its ``k`` nearest other rows."""
    tree = cKDTree(features)
    dist, _ = tree.query(features, k=k + 1)
    return dist[:, 1:].mean(axis=1)


def clean_dataset(points, k=5, threshold=3.0, max_fraction=0.2):
    """Drop k-NN outliers in normalized ``(m, n, V)`` space.

    A point goes when its mean distance to its ``k`` nearest neighbours
    exceeds ``threshold`` times the median of that statistic.  At most
    ``max_fraction`` of the points (the worst ones) are removed.
    """
    points = list(points)
    if k < 1:
        raise DomainError("k must be at least 1")
    if not threshold > 0:
        raise DomainError("threshold must be positive")
    if len(points) < k + 1:
        raise FitError(f"dataset of {len(points)} points is smaller than k+1={k + 1}")
    f, a, _ = _stack(points)
    feats = np.column_stack([f[:, 0], f[:, 1], np.hypot(a[:, 0], a[:, 1])])
    std = feats.std(axis=0)
    std[std == 0] = 1.0
    scores = knn_scores(feats / std, k)
    ref = np.median(scores)
    if ref == 0:
        positive = scores[scores > 0]
        if positive.size == 0:
            return points
        ref = np.median(positive)
    flagged = np.flatnonzero(scores > threshold * ref)
    cap = int(math.floor(max_fraction * len(points)))
    if flagged.size > cap:
        flagged = flagged[np.argsort(-scores[flagged], kind="stable")[:cap]]
    drop = set(flagged.tolist())
    return [p for i, p in enumerate(points) if i not in drop]


def _points(f_ce, rel):
    return [CalibrationPoint(f.copy(), r.copy()) for f, r in zip(f_ce, rel)]


def tunnel_calibration_points(log, params, dwell_s, keep_fraction=0.5):
    """One averaged point per dwell cell of a tunnel sweep.

    The intermediate frame follows the measured yaw; only the last
    ``keep_fraction`` of each dwell is averaged so yaw-step transients are skipped.
    """
    if log.wind is None:
        raise FitError("tunnel calibration needs a log with wind truth columns")
    f_hat = observe_log(log, params)
    yaw = log.attitude[:, 2]
    f_ce = to_intermediate(f_hat, yaw)
    rel = to_intermediate(log.wind - log.velocity, yaw)
    dt = float(log.t[1] - log.t[0]) if len(log) > 1 else params.sample_dt
    per_cell = int(round(dwell_s / dt))
    n_cells = len(log) // per_cell
    if n_cells == 0:
        raise FitError("log shorter than one dwell cell")
    start = per_cell - int(round(keep_fraction * per_cell))
    f_cells = f_ce[: n_cells * per_cell].reshape(n_cells, per_cell, 3)[:, start:].mean(axis=1)
    a_cells = rel[: n_cells * per_cell].reshape(n_cells, per_cell, 3)[:, start:].mean(axis=1)
    return _points(f_cells, a_cells)


def _runs(mask):
    """``(start, stop)`` index pairs of contiguous True runs."""
    edges = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    return list(zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)))


def steady_flight_points(log, params, velocity_tol=0.05, settle_s=None, min_samples=50):
    """Averaged points over stretches of unaccelerated flight.

    A sample counts as steady when every velocity component has stayed
    within ``velocity_tol`` over the trailing ``settle_s`` window (default:
    five observer time constants, so the observer has caught up as well).
    """
    settle = warmup_time(params) if settle_s is None else settle_s
    f_hat = observe_log(log, params)
    yaw = log.attitude[:, 2]
    f_ce = to_intermediate(f_hat, yaw)
    wind = np.zeros_like(log.velocity) if log.wind is None else log.wind
    rel = to_intermediate(wind - log.velocity, yaw)
    dt = float(log.t[1] - log.t[0]) if len(log) > 1 else params.sample_dt
    lag = max(int(round(settle / dt)), 1)
    if len(log) <= lag:
        return []
    win = np.lib.stride_tricks.sliding_window_view(log.velocity, lag + 1, axis=0)
    spread = (win.max(axis=-1) - win.min(axis=-1)).max(axis=-1)
    steady = np.zeros(len(log), dtype=bool)
    steady[lag:] = spread < velocity_tol
    points = []
    for start, stop in _runs(steady):
        if stop - start >= min_samples:
            points.append(CalibrationPoint(f_ce[start:stop].mean(axis=0), rel[start:stop].mean(axis=0)))
    return points


def calibrate(tunnel_log, params, dwell_s, vertical_log=None, clean_k=5, clean_threshold=3.0):
    """Fit a ForceAirModel from a tunnel sweep and optional vertical flights.

    Without a vertical log the vertical map is left at zero.
    """
    points = clean_dataset(tunnel_calibration_points(tunnel_log, params, dwell_s), clean_k, clean_threshold)
    h = fit_horizontal_model(points)
    f_h = force_polar_components(_stack(points)[0])[1]
    v_coeffs = (0.0, 0.0, 0.0)
    v_rms = 0.0
    if vertical_log is not None:
        v = fit_vertical_model(steady_flight_points(vertical_log, params))
        v_coeffs, v_rms = tuple(v.coeffs), v.residual_rms
    return ForceAirModel(
        tuple(h.coeffs), v_coeffs, h.residual_rms, v_rms, (float(f_h.min()), float(f_h.max()))
    )
