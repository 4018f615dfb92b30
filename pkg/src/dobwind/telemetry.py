"""Telemetry and wind-estimate CSV files.

Telemetry columns (inertial frame, z-down, angles in radians)::

    t,px,py,pz,vx,vy,vz,ax,ay,az,roll,pitch,yaw,omega1,omega2,omega3,omega4
    [,wind_x,wind_y,wind_z][,fe_x,fe_y,fe_z]

Lines starting with ``#`` are comments; ``# key=value`` comments before the
header are kept as file metadata.  Floats are written with 17 significant
digits so a write/parse round trip is lossless.
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import ParseError
from .frames import UavState

BASE_COLUMNS = (
    "t", "px", "py", "pz", "vx", "vy", "vz", "ax", "ay", "az",
    "roll", "pitch", "yaw", "omega1", "omega2", "omega3", "omega4",
)
WIND_COLUMNS = ("wind_x", "wind_y", "wind_z")
FORCE_COLUMNS = ("fe_x", "fe_y", "fe_z")
ESTIMATE_COLUMNS = ("t", "Awx", "Awy", "Awz", "Vwh", "Vwv", "theta_w_deg", "confidence")

CONFIDENCE_CODES = ("ok", "low", "warmup")


@dataclass
class TelemetryLog:
    """Columnar telemetry; arrays are time-major and may carry a lane axis."""

    t: np.ndarray
    position: np.ndarray
    velocity: np.ndarray
    acceleration: np.ndarray
    attitude: np.ndarray
    rotor_speeds: np.ndarray
    wind: np.ndarray | None = None
    external_force: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)

    @property
    def has_truth(self):
        return self.wind is not None

    def state(self, k):
        return UavState(
            float(self.t[k]),
            self.position[k],
            self.velocity[k],
            self.acceleration[k],
            self.attitude[k],
            self.rotor_speeds[k],
        )

    def slice(self, start, stop):
        def cut(a):
            return None if a is None else a[start:stop]

        return TelemetryLog(
            self.t[start:stop], cut(self.position), cut(self.velocity),
            cut(self.acceleration), cut(self.attitude), cut(self.rotor_speeds),
            cut(self.wind), cut(self.external_force), dict(self.meta),
        )

    def lane(self, i):
        def pick(a):
            return None if a is None else a[:, i]

        return TelemetryLog(
            self.t.copy(), pick(self.position), pick(self.velocity),
            pick(self.acceleration), pick(self.attitude), pick(self.rotor_speeds),
            pick(self.wind), pick(self.external_force), dict(self.meta),
        )

    def concat_lanes(self):
        """Lay lanes ``(T, N, ...)`` end to end into one ``(N*T, ...)`` log."""
        n_t = len(self.t)
        n_lanes = self.position.shape[1]
        dt = float(self.t[1] - self.t[0]) if n_t > 1 else float(self.meta.get("sample_dt", 1.0))

        def flat(a):
            if a is None:
                return None
            return np.swapaxes(a, 0, 1).reshape((n_lanes * n_t,) + a.shape[2:])

        return TelemetryLog(
            np.arange(n_lanes * n_t) * dt + float(self.t[0]),
            flat(self.position), flat(self.velocity), flat(self.acceleration),
            flat(self.attitude), flat(self.rotor_speeds), flat(self.wind),
            flat(self.external_force), dict(self.meta),
        )

    def columns(self):
        names = list(BASE_COLUMNS)
        blocks = [self.t[:, None], self.position, self.velocity, self.acceleration,
                  self.attitude, self.rotor_speeds]
        if self.wind is not None:
            names += WIND_COLUMNS
            blocks.append(self.wind)
        if self.external_force is not None:
            names += FORCE_COLUMNS
            blocks.append(self.external_force)
        return names, np.hstack(blocks)


def _open_text(source):
    if isinstance(source, (str, os.PathLike)):
        return open(source, "r", encoding="utf-8", newline="")
    if isinstance(source, (bytes, bytearray)):
        try:
            return io.StringIO(bytes(source).decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}") from None
    if isinstance(source, io.TextIOBase):
        return source
    return io.TextIOWrapper(source, encoding="utf-8", newline="")


def _read_table(source):
    """Split a CSV source into metadata, header names and numbered data lines."""
    meta = {}
    header = None
    rows = []
    fh = _open_text(source)
    try:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if header is None and "=" in body:
                    key, _, value = body.partition("=")
                    meta[key.strip()] = value.strip()
                continue
            if header is None:
                header = (lineno, [c.strip() for c in line.split(",")])
            else:
                rows.append((lineno, line.split(",")))
    except UnicodeDecodeError as exc:
        raise ParseError(f"not valid UTF-8: {exc}") from None
    finally:
        if isinstance(source, (str, os.PathLike)):
            fh.close()
    return meta, header, rows


def _to_floats(rows, names, skip=()):
    """Convert string rows to a float array; errors name the line and column."""
    ncol = len(names)
    keep = [j for j in range(ncol) if names[j] not in skip]
    for lineno, fields in rows:
        if len(fields) != ncol:
            raise ParseError(f"expected {ncol} fields, got {len(fields)}", line=lineno)
    try:
        data = np.array([[f[j] for j in keep] for _, f in rows], dtype=np.float64)
    except ValueError:
        data = None
    if data is None:
        for lineno, fields in rows:
            for j in keep:
                try:
                    float(fields[j])
                except ValueError:
                    raise ParseError(f"not a number: {fields[j].strip()!r}", line=lineno,
                                     column=names[j]) from None
    data = data.reshape(len(rows), len(keep))
    bad = ~np.isfinite(data)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise ParseError(f"non-finite value {rows[r][1][keep[c]].strip()!r}",
                         line=rows[r][0], column=names[keep[c]])
    return data, keep


def _check_increasing(t, rows):
    if len(t) > 1:
        steps = np.diff(t)
        if (steps <= 0).any():
            r = int(np.flatnonzero(steps <= 0)[0]) + 1
            raise ParseError(f"timestamp {t[r]!r} does not increase", line=rows[r][0], column="t")


def parse_telemetry(source):
    """Parse a telemetry CSV (path, bytes, or file object) into a TelemetryLog."""
    meta, header, rows = _read_table(source)
    if header is None:
        empty = np.empty((0, 3))
        return TelemetryLog(np.empty(0), empty, empty.copy(), empty.copy(), empty.copy(),
                            np.empty((0, 4)), meta=meta)
    lineno, names = header
    n_base = len(BASE_COLUMNS)
    if tuple(names[:n_base]) != BASE_COLUMNS:
        raise ParseError(f"header must start with {','.join(BASE_COLUMNS)}", line=lineno)
    rest = tuple(names[n_base:])
    allowed = {(): (False, False), WIND_COLUMNS: (True, False), FORCE_COLUMNS: (False, True),
               WIND_COLUMNS + FORCE_COLUMNS: (True, True)}
    if rest not in allowed:
        raise ParseError(f"unexpected trailing columns {','.join(rest)}", line=lineno)
    has_wind, has_force = allowed[rest]
    data, _ = _to_floats(rows, names)
    if len(rows) == 0:
        data = np.empty((0, len(names)))
    t = data[:, 0]
    _check_increasing(t, rows)
    col = n_base
    wind = force = None
    if has_wind:
        wind = data[:, col:col + 3]
        col += 3
    if has_force:
        force = data[:, col:col + 3]
    return TelemetryLog(
        t.copy(), data[:, 1:4].copy(), data[:, 4:7].copy(), data[:, 7:10].copy(),
        data[:, 10:13].copy(), data[:, 13:17].copy(),
        None if wind is None else wind.copy(), None if force is None else force.copy(),
        meta,
    )


def _write_rows(fh, names, data, meta, extra_cols=None):
    for key in sorted(meta):
        fh.write(f"# {key}={meta[key]}\n")
    fh.write(",".join(names) + "\n")
    fmt = ",".join(["%.17g"] * data.shape[1])
    if extra_cols is None:
        fh.writelines(fmt % tuple(r) + "\n" for r in data.tolist())
    else:
        fh.writelines(fmt % tuple(r) + "," + e + "\n" for r, e in zip(data.tolist(), extra_cols))


def write_telemetry(log, dest):
    """Write ``log`` as CSV to a path or text file object."""
    if log.position.ndim != 2:
        raise ValueError("lane-shaped logs must be concatenated before writing")
    names, data = log.columns()
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            _write_rows(fh, names, data, log.meta)
    else:
        _write_rows(dest, names, data, log.meta)


@dataclass
class EstimateLog:
    """Columnar wind estimates; ``theta`` is the vector heading in radians."""

    t: np.ndarray
    wind: np.ndarray
    vwh: np.ndarray
    vwv: np.ndarray
    theta: np.ndarray
    confidence: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.t)


def heading_to_report_deg(theta, convention="vector"):
    """Degrees in [0, 360); ``from`` adds 180 for the blowing-from convention."""
    deg = np.degrees(theta)
    if convention == "from":
        deg = deg + 180.0
    elif convention != "vector":
        raise ValueError(f"unknown direction convention {convention!r}")
    deg = np.mod(deg, 360.0)
    # tiny negative angles round up to exactly 360
    return np.where(deg >= 360.0, 0.0, deg)


def report_deg_to_heading(deg, convention="vector"):
    deg = np.asarray(deg, dtype=float)
    if convention == "from":
        deg = deg - 180.0
    rad = np.radians(np.mod(deg, 360.0))
    return np.where(rad > math.pi, rad - 2 * math.pi, rad)


def write_estimates(est, dest, convention="vector"):
    data = np.column_stack([est.t, est.wind, est.vwh, est.vwv,
                            heading_to_report_deg(est.theta, convention)])
    meta = dict(est.meta)
    meta["direction_convention"] = convention
    conf = [str(c) for c in est.confidence]
    if isinstance(dest, (str, os.PathLike)):
        with open(dest, "w", encoding="utf-8", newline="") as fh:
            _write_rows(fh, list(ESTIMATE_COLUMNS), data, meta, conf)
    else:
        _write_rows(dest, list(ESTIMATE_COLUMNS), data, meta, conf)


def parse_estimates(source):
    meta, header, rows = _read_table(source)
    if header is None:
        return EstimateLog(np.empty(0), np.empty((0, 3)), np.empty(0), np.empty(0),
                           np.empty(0), np.empty(0, dtype=object), meta)
    lineno, names = header
    if tuple(names) != ESTIMATE_COLUMNS:
        raise ParseError(f"estimate header must be {','.join(ESTIMATE_COLUMNS)}", line=lineno)
    data, _ = _to_floats(rows, names, skip=("confidence",))
    if len(rows) == 0:
        data = np.empty((0, 7))
    conf = np.array([f[-1].strip() for _, f in rows], dtype=object)
    for (ln, _), c in zip(rows, conf):
        if c not in CONFIDENCE_CODES:
            raise ParseError(f"unknown confidence flag {c!r}", line=ln, column="confidence")
    _check_increasing(data[:, 0], rows)
    convention = meta.get("direction_convention", "vector")
    return EstimateLog(data[:, 0].copy(), data[:, 1:4].copy(), data[:, 4].copy(),
                       data[:, 5].copy(), report_deg_to_heading(data[:, 6], convention),
                       conf, meta)


def sniff_kind(path):
    """Return ``"estimates"`` or ``"telemetry"`` from a file's header row."""
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            s = line.strip()
            if s and not s.startswith("#"):
                return "estimates" if s.split(",")[0:2] == ["t", "Awx"] else "telemetry"
    return "telemetry"
