"""Backward characteristics, cone maximum principle, line constancy.

A level value v0 admissible at (T, x0) can be chased backwards through
the frames of a trajectory: each step moves the foot point within the
backward cone spanned by the convex hull of the admissible wave speeds,
keeping v0 between the local semicontinuous envelopes.  On continuous
solutions the resulting polygons straighten into lines along which u is
constant.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .errors import GeometryError, InputError, LevelLostError
from .fields import ScalarField, Trajectory
from .fluxes import FluxSpec
from .solver import grid_floor
from .structure import _ball_footprint, oscillation_modulus


@dataclass(frozen=True)
class VelocityHull:
    """Convex hull of sampled wave speeds {a(v) : v in interval}."""

    vertices: np.ndarray  # extreme points, shape (n_vertices, dim)
    samples: np.ndarray  # the dense speed samples used

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    def support(self, direction: np.ndarray) -> float:
        return float((self.samples @ np.asarray(direction, dtype=float)).max())

    def contains(self, point, tol: float = 1e-9, n_dirs: int = 256) -> bool:
        p = np.atleast_1d(np.asarray(point, dtype=float))
        if self.dim == 1:
            lo, hi = self.samples.min(), self.samples.max()
            return bool(lo - tol <= p[0] <= hi + tol)
        theta = 2 * np.pi * np.arange(n_dirs) / n_dirs
        dirs = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
        sup = (self.samples @ dirs.T).max(axis=0)
        return bool(np.all(dirs @ p <= sup + tol))


def velocity_hull(flux: FluxSpec, interval, spatial: bool = False, samples: int = 1000) -> VelocityHull:
    """Hull of the wave-speed curve over a value interval.

    spatial=True drops the constant time component of a time-augmented
    flux, which is the hull the backward stepping uses.
    """
    lo, hi = interval
    flo, fhi = flux.interval
    if lo < flo - 1e-12 or hi > fhi + 1e-12:
        raise InputError("interval must lie inside the flux interval")
    v = np.linspace(lo, hi, samples)
    pts = flux.a_spatial(v) if spatial else flux.a(v)
    if pts.shape[-1] == 1:
        verts = np.array([[pts.min()], [pts.max()]])
        return VelocityHull(verts, pts)
    try:
        hull = ConvexHull(pts)
        verts = pts[hull.vertices]
    except QhullError:
        # degenerate (collinear) speed curve: extreme points of the segment
        c = pts.mean(axis=0)
        d = pts - c
        sv, vecs = np.linalg.eigh(d.T @ d)
        axis = vecs[:, -1]
        proj = d @ axis
        verts = np.stack([pts[proj.argmin()], pts[proj.argmax()]])
    return VelocityHull(verts, pts)


def _envelopes(frame: ScalarField) -> tuple[np.ndarray, np.ndarray]:
    fp = _ball_footprint(frame.spacing, 1.01 * min(frame.spacing))
    lo = ndimage.minimum_filter(frame.values, footprint=fp, mode="nearest")
    hi = ndimage.maximum_filter(frame.values, footprint=fp, mode="nearest")
    return lo, hi


@dataclass(frozen=True)
class ConeCheck:
    """Difference between a point value and its backward-cone extremes."""

    upper_excess: float  # upper(t,x) - max over foot of upper(t-tau)
    lower_excess: float  # min over foot of lower(t-tau) - lower(t,x)
    tol: float

    @property
    def ok(self) -> bool:
        return self.upper_excess <= self.tol and self.lower_excess <= self.tol


def cone_max_principle_check(
    traj: Trajectory,
    flux: FluxSpec,
    x,
    t: float,
    tau: float,
    pad_cells: int = 2,
) -> ConeCheck:
    """Check value(t, x) against the extremes over the foot x - tau K.

    K is the hull of spatial wave speeds over the trajectory's value
    range; the discrete foot is inflated by pad_cells to absorb the
    scheme's own smearing, and the tolerance is twice the grid floor.
    """
    if tau <= 0:
        raise InputError("tau must be positive")
    frame_t = traj.frame_at(t)
    frame_s = traj.frame_at(t - tau)
    if frame_t.ndim != 1:
        raise InputError("cone check is implemented for 1D-space trajectories")
    lo = min(f.bounds[0] for f in traj.frames)
    hi = max(f.bounds[1] for f in traj.frames)
    speeds = flux.a_spatial(np.linspace(lo, hi, 513))[..., 0]
    x = float(np.atleast_1d(x)[0])
    dx = frame_t.spacing[0]
    foot_lo = x - tau * speeds.max() - pad_cells * dx
    foot_hi = x - tau * speeds.min() + pad_cells * dx
    centers = frame_s.axis_centers(0)
    sel = (centers >= foot_lo) & (centers <= foot_hi)
    if not sel.any():
        raise GeometryError("backward cone foot leaves the grid")
    dom = frame_s.domain()[0]
    if foot_lo < dom[0] - dx or foot_hi > dom[1] + dx:
        raise GeometryError("backward cone foot leaves the domain")
    lo_t, hi_t = _envelopes(frame_t)
    lo_s, hi_s = _envelopes(frame_s)
    i = frame_t.index_of([x])[0]
    tol = 2.0 * grid_floor(frame_t, flux)
    return ConeCheck(
        upper_excess=float(hi_t[i] - hi_s[sel].max()),
        lower_excess=float(lo_s[sel].min() - lo_t[i]),
        tol=tol,
    )


@dataclass(frozen=True)
class CharPolygon:
    """Backward polygonal characteristic through (times[-1], points[-1])."""

    times: np.ndarray
    points: np.ndarray
    level: float
    segment_hulls: tuple[tuple[float, float], ...]  # value interval per segment
    max_speed: float

    def slopes(self) -> np.ndarray:
        return np.diff(self.points) / np.diff(self.times)

    def lipschitz_ok(self, slack: float = 1e-9) -> bool:
        return bool(np.all(np.abs(np.diff(self.points)) <= self.max_speed * np.diff(self.times) + slack))

    def chord_deviation(self) -> float:
        """Max distance of the vertices from the end-to-end chord."""
        t0, t1 = self.times[0], self.times[-1]
        chord = self.points[0] + (self.points[-1] - self.points[0]) * (self.times - t0) / (t1 - t0)
        return float(np.abs(self.points - chord).max())


def backward_characteristic(
    traj: Trajectory,
    flux: FluxSpec,
    x0,
    v0: float,
    k: int,
    tol: float | None = None,
    pad_cells: int = 2,
) -> CharPolygon:
    """Chase the level v0 backwards through k uniform steps of the run.

    Each backward step searches the discrete foot segment x_j - tau * K
    for cells whose envelope interval contains v0 (within tol, default
    twice the grid floor); ties break towards the single-speed prediction
    x_j - tau * a(v0).  A step with no admissible cell raises
    LevelLostError carrying the best near-miss.
    """
    if k < 2:
        raise InputError("need k >= 2 segments")
    grid = traj.grid
    if grid.ndim != 1:
        raise InputError("backward characteristics are implemented for 1D space")
    t_all = traj.times
    t0, t1 = t_all[0], t_all[-1]
    tau = (t1 - t0) / k
    t_nodes = t0 + tau * np.arange(k + 1)
    frames = [traj.frame_at(t) for t in t_nodes]
    lo = min(f.bounds[0] for f in traj.frames)
    hi = max(f.bounds[1] for f in traj.frames)
    vs = np.linspace(lo, hi, 513)
    speeds = flux.a_spatial(vs)[..., 0]
    a_lo, a_hi = float(speeds.min()), float(speeds.max())
    M = max(abs(a_lo), abs(a_hi))
    if tol is None:
        tol = 2.0 * grid_floor(grid, flux)
    dx = grid.spacing[0]
    centers = grid.axis_centers(0)
    env = {j: _envelopes(frames[j]) for j in range(k + 1)}

    x0 = float(np.atleast_1d(x0)[0])
    i0 = grid.index_of([x0])[0]
    lo_e, hi_e = env[k]
    if not (lo_e[i0] - tol <= v0 <= hi_e[i0] + tol):
        raise InputError(
            f"v0={v0} outside the envelope interval [{lo_e[i0]}, {hi_e[i0]}] at the end point"
        )
    a_v0 = float(flux.a_spatial(np.array(v0))[0])
    points = np.empty(k + 1)
    points[k] = x0
    hulls = []
    for j in range(k, 0, -1):
        xj = points[j]
        lo_f, hi_f = env[j - 1]
        y_lo = xj - tau * a_hi - pad_cells * dx
        y_hi = xj - tau * a_lo + pad_cells * dx
        sel = np.where((centers >= y_lo) & (centers <= y_hi))[0]
        if len(sel) == 0:
            raise GeometryError("backward foot segment leaves the grid")
        gaps = np.maximum(lo_f[sel] - v0, v0 - hi_f[sel])
        admissible = sel[gaps <= tol]
        if len(admissible) == 0:
            b = int(np.argmin(gaps))
            raise LevelLostError(
                f"level {v0} lost at t={t_nodes[j - 1]:g}",
                time=float(t_nodes[j - 1]),
                best_point=float(centers[sel[b]]),
                best_gap=float(gaps[b]),
            )
        target = xj - tau * a_v0
        y = centers[admissible[np.argmin(np.abs(centers[admissible] - target))]]
        points[j - 1] = y
        iy = np.searchsorted(centers, y)
        ix = grid.index_of([xj])[0]
        hulls.append(
            (
                float(min(lo_f[iy], env[j][0][ix])),
                float(max(hi_f[iy], env[j][1][ix])),
            )
        )
    return CharPolygon(
        times=t_nodes,
        points=points,
        level=float(v0),
        segment_hulls=tuple(reversed(hulls)),
        max_speed=M + (pad_cells * dx) / tau,
    )


def line_constancy_check(
    field: ScalarField,
    x0,
    flux: FluxSpec,
    osc_tol: float | None = None,
    step_frac: float = 0.5,
) -> float:
    """Max deviation of u along the straight ray with slope a(u(x0)).

    Requires continuity at x0 (small oscillation over a 2-cell ball); the
    ray is sampled over the maximal parameter range staying inside the
    domain.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float))
    if len(x0) != field.ndim:
        raise InputError("x0 dimension does not match the field")
    if osc_tol is None:
        osc_tol = 2.0 * grid_floor(field, flux)
    osc, _ = oscillation_modulus(field, x0, [2.05 * max(field.spacing)])
    if osc[0] > osc_tol:
        raise InputError(f"x0 looks discontinuous: osc={osc[0]:g} > tol={osc_tol:g}")
    u0 = float(field.interp(x0))
    direction = flux.a(np.array(u0))
    if len(direction) != field.ndim:
        raise InputError("flux dimension does not match the field")
    s_lo, s_hi = -np.inf, np.inf
    for kax, (lo, hi) in enumerate(field.domain()):
        d = direction[kax]
        margin = 0.5 * field.spacing[kax]
        if abs(d) < 1e-14:
            if not (lo + margin <= x0[kax] <= hi - margin):
                raise GeometryError("x0 outside the domain core")
            continue
        bounds = sorted([(lo + margin - x0[kax]) / d, (hi - margin - x0[kax]) / d])
        s_lo = max(s_lo, bounds[0])
        s_hi = min(s_hi, bounds[1])
    if not np.isfinite(s_lo) or not np.isfinite(s_hi) or s_hi <= s_lo:
        return 0.0
    step = step_frac * min(field.spacing) / max(np.linalg.norm(direction), 1e-14)
    s = np.arange(s_lo, s_hi + step, step)
    pts = x0[None, :] + s[:, None] * direction[None, :]
    vals = field.interp(pts)
    return float(np.abs(vals - u0).max())
