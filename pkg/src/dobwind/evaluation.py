"""Error metrics of wind estimates against ground truth."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import WindEstimationError
from .telemetry import EstimateLog

# Wind-tunnel reference figures of the physical platform, for side-by-side display.
REFERENCE_ERRORS = {
    "mean_speed_error_mps": 0.11,
    "max_speed_error_mps": 0.21,
    "mean_angle_error_deg": 2.8,
    "max_angle_error_deg": 5.3,
}


def angle_error_deg(a_rad, b_rad):
    """Absolute heading difference in degrees, wrapped to [0, 180]."""
    d = np.degrees(np.asarray(a_rad) - np.asarray(b_rad))
    return np.abs(np.mod(d + 180.0, 360.0) - 180.0)


@dataclass
class SpeedBin:
    lo: float
    hi: float
    n: int
    mean_speed_error: float
    max_speed_error: float
    n_angle: int
    mean_angle_error_deg: float
    max_angle_error_deg: float


@dataclass
class ErrorReport:
    n_matched: int
    n_dropped: int
    n_warmup_excluded: int
    n_angle: int
    mean_speed_error: float
    max_speed_error: float
    mean_angle_error_deg: float
    max_angle_error_deg: float
    warmup_s: float
    min_angle_speed: float
    bins: list = field(default_factory=list)
    reference: dict = field(default_factory=lambda: dict(REFERENCE_ERRORS))

    def summary(self):
        return {
            "mean_speed_error_mps": self.mean_speed_error,
            "max_speed_error_mps": self.max_speed_error,
            "mean_angle_error_deg": self.mean_angle_error_deg,
            "max_angle_error_deg": self.max_angle_error_deg,
        }


def estimates_from_truth(log):
    """Treat the truth columns of a telemetry log as perfect estimates."""
    if log.wind is None:
        raise WindEstimationError("telemetry log has no wind truth columns")
    w = log.wind
    theta = np.arctan2(w[:, 1], w[:, 0])
    return EstimateLog(log.t.copy(), w.copy(), np.hypot(w[:, 0], w[:, 1]), w[:, 2].copy(),
                       theta, np.full(len(log), "ok", dtype=object))


def _nearest(sorted_t, query):
    idx = np.clip(np.searchsorted(sorted_t, query), 1, max(len(sorted_t) - 1, 1))
    left = sorted_t[idx - 1]
    right = sorted_t[np.minimum(idx, len(sorted_t) - 1)]
    pick_left = np.abs(query - left) <= np.abs(right - query)
    return np.where(pick_left, idx - 1, np.minimum(idx, len(sorted_t) - 1))


def _stats(x):
    if x.size == 0:
        return math.nan, math.nan
    return float(x.mean()), float(x.max())


def evaluate(estimates, truth_t, truth_wind=None, tolerance_s=None, warmup_s=0.0,
             min_angle_speed=1.0, min_true_speed=0.0, bin_width=1.0):
    """Compare estimates with ground truth joined on nearest timestamp.

    ``truth_t`` may be a TelemetryLog carrying wind columns.  Rows flagged
    ``warmup`` or earlier than ``warmup_s`` after the first estimate are
    excluded.  Angle errors count only where the true horizontal speed is at
    least ``min_angle_speed``; ``min_true_speed`` filters both metrics.
    """
    if truth_wind is None:
        if getattr(truth_t, "wind", None) is None:
            raise WindEstimationError("truth needs wind columns")
        truth_wind = truth_t.wind
        truth_t = truth_t.t
    truth_t = np.asarray(truth_t, dtype=float)
    truth_wind = np.asarray(truth_wind, dtype=float)
    order = np.argsort(truth_t, kind="stable")
    truth_t, truth_wind = truth_t[order], truth_wind[order]
    est_order = np.argsort(estimates.t, kind="stable")
    t = np.asarray(estimates.t)[est_order]
    vwh = np.asarray(estimates.vwh)[est_order]
    theta = np.asarray(estimates.theta)[est_order]
    conf = np.asarray(estimates.confidence)[est_order]
    if len(t) == 0 or len(truth_t) == 0:
        raise WindEstimationError("no overlap between estimates and truth")
    if tolerance_s is None:
        dt = np.median(np.diff(truth_t)) if len(truth_t) > 1 else 0.0
        tolerance_s = 0.5 * dt
    j = _nearest(truth_t, t)
    joined = np.abs(truth_t[j] - t) <= tolerance_s + 1e-12
    warm = (conf == "warmup") | (t - t[0] < warmup_s)
    n_warm = int((joined & warm).sum())
    keep = joined & ~warm
    tw = truth_wind[j[keep]]
    true_speed = np.hypot(tw[:, 0], tw[:, 1])
    true_theta = np.arctan2(tw[:, 1], tw[:, 0])
    sel = true_speed >= min_true_speed
    if not sel.any():
        raise WindEstimationError("no overlap between estimates and truth")
    speed_err = np.abs(vwh[keep] - true_speed)[sel]
    ang_sel = true_speed[sel] >= min_angle_speed
    ang_err = angle_error_deg(theta[keep][sel], true_theta[sel])[ang_sel]
    ms, xs = _stats(speed_err)
    ma, xa = _stats(ang_err)
    bins = []
    ts = true_speed[sel]
    edges = np.floor(ts / bin_width).astype(int)
    for b in np.unique(edges):
        inb = edges == b
        a_inb = inb & ang_sel
        bms, bxs = _stats(speed_err[inb])
        ang_b = angle_error_deg(theta[keep][sel][a_inb], true_theta[sel][a_inb])
        bma, bxa = _stats(ang_b)
        bins.append(SpeedBin(b * bin_width, (b + 1) * bin_width, int(inb.sum()), bms, bxs,
                             int(a_inb.sum()), bma, bxa))
    return ErrorReport(
        n_matched=int(sel.sum()),
        n_dropped=int((~joined).sum()),
        n_warmup_excluded=n_warm,
        n_angle=int(ang_err.size),
        mean_speed_error=ms,
        max_speed_error=xs,
        mean_angle_error_deg=ma,
        max_angle_error_deg=xa,
        warmup_s=float(warmup_s),
        min_angle_speed=float(min_angle_speed),
        bins=bins,
    )


def format_report(report):
    out = io.StringIO()
    out.write("wind estimate error report\n")
    out.write(f"  matched samples      {report.n_matched}\n")
    out.write(f"  dropped (no match)   {report.n_dropped}\n")
    out.write(f"  warm-up excluded     {report.n_warmup_excluded} (window {report.warmup_s:.3f} s)\n")
    out.write(f"  angle samples        {report.n_angle} (true speed >= {report.min_angle_speed:g} m/s)\n")
    out.write(f"{'metric':<22}{'this run':>12}{'reference':>12}\n")
    ref = report.reference
    for key, value in report.summary().items():
        out.write(f"{key:<22}{value:>12.4f}{ref[key]:>12.2f}\n")
    out.write("per speed bin (m/s): lo,hi,n,mean_speed,max_speed,n_angle,mean_angle,max_angle\n")
    for b in report.bins:
        out.write(f"  {b.lo:g},{b.hi:g},{b.n},{b.mean_speed_error:.4f},{b.max_speed_error:.4f},"
                  f"{b.n_angle},{b.mean_angle_error_deg:.4f},{b.max_angle_error_deg:.4f}\n")
    return out.getvalue()


def report_csv(report):
    out = io.StringIO()
    out.write("section,key,value,reference\n")
    ref = report.reference
    for key, value in report.summary().items():
        out.write(f"overall,{key},{value:.17g},{ref[key]}\n")
    for key in ("n_matched", "n_dropped", "n_warmup_excluded", "n_angle"):
        out.write(f"counts,{key},{getattr(report, key)},\n")
    out.write(f"settings,warmup_s,{report.warmup_s:.17g},\n")
    out.write(f"settings,min_angle_speed,{report.min_angle_speed:.17g},\n")
    for b in report.bins:
        tag = f"bin_{b.lo:g}_{b.hi:g}"
        out.write(f"{tag},n,{b.n},\n")
        out.write(f"{tag},mean_speed_error_mps,{b.mean_speed_error:.17g},\n")
        out.write(f"{tag},max_speed_error_mps,{b.max_speed_error:.17g},\n")
        out.write(f"{tag},n_angle,{b.n_angle},\n")
        out.write(f"{tag},mean_angle_error_deg,{b.mean_angle_error_deg:.17g},\n")
        out.write(f"{tag},max_angle_error_deg,{b.max_angle_error_deg:.17g},\n")
    return out.getvalue()
