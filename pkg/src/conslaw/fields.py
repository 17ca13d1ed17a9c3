"""Grid-based scalar fields and time series of them.

A ScalarField stores cell averages of a scalar quantity on a uniform,
axis-aligned grid in 1 or 2 dimensions.  The same type carries either a
spatial slice u(t0, .) or a full space-time sample (axis 0 = t), which is
how trajectory-level checks reuse the single-field machinery.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import GeometryError, InputError

_BIN_MAGIC = b"CLAW"
_BIN_VERSION = 1


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class ScalarField:
    """Cell-averaged scalar on a uniform grid.

    origin holds the coordinate of the lower domain edge per axis; the
    center of cell i is origin + (i + 1/2) * spacing.
    """

    values: np.ndarray
    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    time: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "values", _freeze(self.values))
        object.__setattr__(self, "origin", tuple(float(o) for o in self.origin))
        object.__setattr__(self, "spacing", tuple(float(s) for s in self.spacing))
        if self.values.ndim not in (1, 2):
            raise InputError(f"only 1D/2D grids supported, got ndim={self.values.ndim}")
        if len(self.origin) != self.values.ndim or len(self.spacing) != self.values.ndim:
            raise InputError("origin/spacing rank does not match values")
        if any(s <= 0 for s in self.spacing):
            raise InputError("grid spacing must be positive")
        if not np.all(np.isfinite(self.values)):
            raise InputError("field values must be finite")

    # -- geometry ---------------------------------------------------------

    @property
    def ndim(self) -> int:
        return self.values.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return self.values.shape

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def bounds(self) -> tuple[float, float]:
        return float(self.values.min()), float(self.values.max())

    def axis_centers(self, axis: int) -> np.ndarray:
        n = self.dims[axis]
        return self.origin[axis] + (np.arange(n) + 0.5) * self.spacing[axis]

    def domain(self) -> list[tuple[float, float]]:
        return [
            (self.origin[k], self.origin[k] + self.dims[k] * self.spacing[k])
            for k in range(self.ndim)
        ]

    def with_values(self, values: np.ndarray, time: float | None = None) -> "ScalarField":
        return replace(self, values=values, time=self.time if time is None else float(time))

    # -- norms ------------------------------------------------------------

    def sup_norm(self) -> float:
        return float(np.abs(self.values).max())

    def l1_norm(self) -> float:
        return float(np.abs(self.values).sum() * self.cell_volume)

    # -- point location and interpolation ---------------------------------

    def index_of(self, point: Sequence[float]) -> tuple[int, ...]:
        """Index of the cell containing a point (clipped to the grid)."""
        idx = []
        for k, x in enumerate(point):
            i = int(np.floor((x - self.origin[k]) / self.spacing[k]))
            idx.append(min(max(i, 0), self.dims[k] - 1))
        return tuple(idx)

    def interp(self, points: np.ndarray) -> np.ndarray:
        """Multilinear interpolation of cell averages at physical points.

        points has shape (..., ndim) (or (...,) in 1D).  Points outside the
        strip of cell centers are clamped (constant extrapolation).
        """
        pts = np.asarray(points, dtype=float)
        if self.ndim == 1 and pts.ndim >= 1 and (pts.shape[-1] != 1):
            pts = pts[..., None]
        coords = []
        for k in range(self.ndim):
            s = (pts[..., k] - self.origin[k]) / self.spacing[k] - 0.5
            coords.append(np.clip(s, 0.0, self.dims[k] - 1.0))
        if self.ndim == 1:
            x = coords[0]
            i0 = np.floor(x).astype(int)
            i1 = np.minimum(i0 + 1, self.dims[0] - 1)
            w = x - i0
            return (1 - w) * self.values[i0] + w * self.values[i1]
        x, y = coords
        i0 = np.floor(x).astype(int)
        j0 = np.floor(y).astype(int)
        i1 = np.minimum(i0 + 1, self.dims[0] - 1)
        j1 = np.minimum(j0 + 1, self.dims[1] - 1)
        wx = x - i0
        wy = y - j0
        v = self.values
        return (
            (1 - wx) * (1 - wy) * v[i0, j0]
            + wx * (1 - wy) * v[i1, j0]
            + (1 - wx) * wy * v[i0, j1]
            + wx * wy * v[i1, j1]
        )

    # -- discrete balls ----------------------------------------------------

    def ball_mask(self, center: Sequence[float], radius: float) -> np.ndarray:
        """Boolean mask of cells whose centers lie within radius of center."""
        if radius <= 0:
            raise InputError("ball radius must be positive")
        grids = np.meshgrid(*[self.axis_centers(k) for k in range(self.ndim)], indexing="ij")
        d2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        return d2 <= radius * radius * (1 + 1e-12)

    def ball_values(self, center: Sequence[float], radius: float) -> np.ndarray:
        mask = self.ball_mask(center, radius)
        if not mask.any():
            raise GeometryError(f"ball of radius {radius} at {center} contains no cell centers")
        return self.values[mask]

    def sup_norm_ball(self, center, radius) -> float:
        return float(np.abs(self.ball_values(center, radius)).max())

    def l1_norm_ball(self, center, radius) -> float:
        return float(np.abs(self.ball_values(center, radius)).sum() * self.cell_volume)


def grid_1d(n: int, xlo: float, xhi: float) -> tuple[tuple[float], tuple[float]]:
    if n < 2 or xhi <= xlo:
        raise InputError("need n >= 2 and xhi > xlo")
    return (float(xlo),), ((xhi - xlo) / n,)


def field_from_function(
    fn: Callable[..., np.ndarray],
    n: Sequence[int],
    lo: Sequence[float],
    hi: Sequence[float],
    time: float = 0.0,
) -> ScalarField:
    """Sample fn at cell centers (midpoint rule for the cell averages)."""
    n = tuple(int(k) for k in n)
    origin = tuple(float(x) for x in lo)
    spacing = tuple((float(h) - float(l)) / k for l, h, k in zip(lo, hi, n))
    axes = [origin[k] + (np.arange(n[k]) + 0.5) * spacing[k] for k in range(len(n))]
    if len(n) == 1:
        vals = np.asarray(fn(axes[0]), dtype=float)
    else:
        X, Y = np.meshgrid(axes[0], axes[1], indexing="ij")
        vals = np.asarray(fn(X, Y), dtype=float)
    return ScalarField(vals, origin, spacing, time=time)


@dataclass(frozen=True)
class Trajectory:
    """Time-ordered snapshots of one solver run plus its configuration."""

    frames: tuple[ScalarField, ...]
    flux_name: str
    config: Mapping[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "frames", tuple(self.frames))
        object.__setattr__(self, "config", dict(self.config))
        times = [f.time for f in self.frames]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise InputError("frame times must be strictly increasing")
        geo = {(f.dims, f.origin, f.spacing) for f in self.frames}
        if len(geo) > 1:
            raise InputError("all frames must share grid geometry")

    @property
    def times(self) -> np.ndarray:
        return np.array([f.time for f in self.frames])

    @property
    def grid(self) -> ScalarField:
        return self.frames[0]

    def frame_at(self, t: float, tol: float = 1e-9) -> ScalarField:
        k = int(np.argmin(np.abs(self.times - t)))
        if abs(self.frames[k].time - t) > tol:
            raise InputError(f"no frame at t={t}; nearest is t={self.frames[k].time}")
        return self.frames[k]

    def spacetime_field(self) -> ScalarField:
        """Materialize the run as one field with t as axis 0.

        Only 1D-space trajectories fit the 2D field container.  Frame times
        must be uniformly spaced; the cell value on a time row is the
        average of the two bounding frames, so rows sit at interval
        midpoints.
        """
        if self.grid.ndim != 1:
            raise GeometryError("spacetime_field needs a 1D-space trajectory")
        t = self.times
        if len(t) < 2:
            raise InputError("need at least two frames")
        dt = np.diff(t)
        if not np.allclose(dt, dt[0], rtol=1e-6, atol=1e-12):
            raise InputError("spacetime_field needs uniformly spaced frames")
        rows = np.stack(
            [0.5 * (a.values + b.values) for a, b in zip(self.frames, self.frames[1:])]
        )
        origin = (float(t[0]), self.grid.origin[0])
        spacing = (float(dt[0]), self.grid.spacing[0])
        return ScalarField(rows, origin, spacing, time=float(t[0]))


def spacetime_frames(field: ScalarField) -> list[ScalarField]:
    """Split a (t, x) field back into spatial slices at the row centers."""
    if field.ndim != 2:
        raise InputError("need a 2D space-time field")
    t = field.axis_centers(0)
    return [
        ScalarField(field.values[k], (field.origin[1],), (field.spacing[1],), time=float(t[k]))
        for k in range(field.dims[0])
    ]


# -- file formats ----------------------------------------------------------


def write_field_csv(f: ScalarField, path) -> None:
    with open(path, "w") as fh:
        if f.ndim == 1:
            fh.write("x,value\n")
            for x, v in zip(f.axis_centers(0), f.values):
                fh.write(f"{x!r},{v!r}\n")
        else:
            fh.write("x,y,value\n")
            xs, ys = f.axis_centers(0), f.axis_centers(1)
            for i, x in enumerate(xs):
                for j, y in enumerate(ys):
                    fh.write(f"{x!r},{y!r},{f.values[i, j]!r}\n")


def read_field_csv(path, time: float = 0.0) -> ScalarField:
    data = np.genfromtxt(path, delimiter=",", names=True)
    names = data.dtype.names
    if names == ("x", "value"):
        x = data["x"]
        dx = x[1] - x[0] if len(x) > 1 else 1.0
        return ScalarField(data["value"], (x[0] - dx / 2,), (dx,), time=time)
    if names == ("x", "y", "value"):
        xs = np.unique(data["x"])
        ys = np.unique(data["y"])
        dx = xs[1] - xs[0] if len(xs) > 1 else 1.0
        dy = ys[1] - ys[0] if len(ys) > 1 else 1.0
        vals = data["value"].reshape(len(xs), len(ys))
        return ScalarField(vals, (xs[0] - dx / 2, ys[0] - dy / 2), (dx, dy), time=time)
    raise InputError(f"unrecognized field CSV header: {names}")


def write_field_bin(f: ScalarField, path) -> None:
    """Binary frame: magic, version, ndim, dims, origin, spacing, time, then
    row-major float64 payload."""
    with open(path, "wb") as fh:
        fh.write(_BIN_MAGIC)
        fh.write(struct.pack("<HH", _BIN_VERSION, f.ndim))
        fh.write(struct.pack(f"<{f.ndim}q", *f.dims))
        fh.write(struct.pack(f"<{f.ndim}d", *f.origin))
        fh.write(struct.pack(f"<{f.ndim}d", *f.spacing))
        fh.write(struct.pack("<d", f.time))
        fh.write(np.ascontiguousarray(f.values).tobytes())


def read_field_bin(path) -> ScalarField:
    with open(path, "rb") as fh:
        if fh.read(4) != _BIN_MAGIC:
            raise InputError(f"{path}: not a conslaw field file")
        version, ndim = struct.unpack("<HH", fh.read(4))
        if version != _BIN_VERSION:
            raise InputError(f"{path}: unsupported version {version}")
        dims = struct.unpack(f"<{ndim}q", fh.read(8 * ndim))
        origin = struct.unpack(f"<{ndim}d", fh.read(8 * ndim))
        spacing = struct.unpack(f"<{ndim}d", fh.read(8 * ndim))
        (time,) = struct.unpack("<d", fh.read(8))
        payload = fh.read(8 * int(np.prod(dims)))
        values = np.frombuffer(payload, dtype="<f8").reshape(dims)
    return ScalarField(values, origin, spacing, time=time)
