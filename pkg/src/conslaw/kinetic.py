"""Kinetic representation and the discrete entropy dissipation measure.

The kinetic function f(x, v) takes values in {-1, 0, 1} according to the
level-set structure of u.  The nonnegative dissipation measure mu is
estimated from the clipped discrete Kruzhkov entropy residuals of the
scheme replayed between trajectory frames, using the identity that the
dissipation of |u - l| is twice the v-marginal density of mu at level l.
The per (cell, level) mass stored here is therefore

    mass = 0.5 * max(0, -residual) * cell_volume * dt * level_width,

which makes the array a direct Riemann-sum approximation of mu over the
space-time cell times the level slab, so the grand total of a unit-time
Burgers 1->0 shock run approaches integral of v(1-v)/2 over (0,1) = 1/12.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import GeometryError, InputError
from .fields import ScalarField, Trajectory
from .fluxes import FluxSpec
from .solver import _entropy, _entropy_flux, _pad, advance, numerical_fluxes, step_residuals


def thread_count() -> int:
    """Parallelism cap: CONSLAW_THREADS if set, else 1 (deterministic)."""
    raw = os.environ.get("CONSLAW_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def level_widths(v_levels: np.ndarray) -> np.ndarray:
    """Slab width represented by each level (half-gap to the neighbors)."""
    v = np.asarray(v_levels, dtype=float)
    if len(v) == 1:
        return np.array([1.0])
    mid = np.empty(len(v) + 1)
    mid[1:-1] = 0.5 * (v[:-1] + v[1:])
    mid[0] = v[0] - 0.5 * (v[1] - v[0])
    mid[-1] = v[-1] + 0.5 * (v[-1] - v[-2])
    return np.diff(mid)


def default_level_grid(lo: float, hi: float, n: int = 64) -> np.ndarray:
    """n uniform levels over the value range padded by 1% on each side."""
    pad = 0.01 * max(hi - lo, 1e-12)
    edges = np.linspace(lo - pad, hi + pad, n + 1)
    return 0.5 * (edges[:-1] + edges[1:])


@dataclass(frozen=True)
class KineticField:
    """Sign of the kinetic function per cell and level."""

    base: ScalarField
    v_levels: np.ndarray
    values: np.ndarray  # int8, shape grid + (levels,)

    def reconstruct_abs(self) -> np.ndarray:
        """Sum |f| * level width, which recovers |u| to one level width."""
        return (np.abs(self.values.astype(float)) * level_widths(self.v_levels)).sum(axis=-1)


def kinetic_function(field: ScalarField, v_levels) -> KineticField:
    """Evaluate the level-set indicator at each cell and level midpoint."""
    v = np.asarray(v_levels, dtype=float)
    if np.any(np.diff(v) <= 0):
        raise InputError("v_levels must be sorted strictly increasing")
    u = field.values[..., None]
    up = (v > 0) & (v < u)
    dn = (v < 0) & (v > u)
    return KineticField(field, v, up.astype(np.int8) - dn.astype(np.int8))


@dataclass(frozen=True)
class DissipationMeasure:
    """Nonnegative mass per (frame window, cell, level) of one trajectory.

    frame_times has length n_windows + 1; window k spans
    [frame_times[k], frame_times[k+1]] and its time-center is the midpoint.
    clipped_positive records the total positive residual part discarded by
    the clipping (an O(dx) oscillation artifact, reported for honesty).
    """

    frame_times: np.ndarray
    origin: tuple[float, ...]
    spacing: tuple[float, ...]
    v_levels: np.ndarray
    mass: np.ndarray  # shape (n_windows,) + grid + (n_levels,)
    clipped_positive: float

    def __post_init__(self):
        if np.any(self.mass < 0):
            raise InputError("dissipation mass must be nonnegative")

    @property
    def total(self) -> float:
        return float(self.mass.sum())

    @property
    def spatial_ndim(self) -> int:
        return len(self.origin)

    def per_cell(self) -> np.ndarray:
        """Mass summed over levels: shape (n_windows,) + grid."""
        return self.mass.sum(axis=-1)

    def level_marginal(self) -> np.ndarray:
        """Mass per level, summed over all space-time cells."""
        return self.mass.sum(axis=tuple(range(self.mass.ndim - 1)))

    def window_centers(self) -> np.ndarray:
        return 0.5 * (self.frame_times[:-1] + self.frame_times[1:])

    def spacetime_centers(self) -> list[np.ndarray]:
        """Cell-center coordinate arrays, time axis first."""
        axes = [self.window_centers()]
        for k in range(self.spatial_ndim):
            n = self.mass.shape[1 + k]
            axes.append(self.origin[k] + (np.arange(n) + 0.5) * self.spacing[k])
        return axes

    def ball_mass(self, center, radius: float, level_range=None) -> float:
        """Mass of (space-time ball) x (level slab)."""
        axes = self.spacetime_centers()
        grids = np.meshgrid(*axes, indexing="ij")
        d2 = sum((g - c) ** 2 for g, c in zip(grids, center))
        mask = d2 <= radius * radius * (1 + 1e-12)
        m = self.mass
        if level_range is not None:
            vlo, vhi = level_range
            sel = (self.v_levels >= vlo) & (self.v_levels <= vhi)
            m = m[..., sel]
        return float(m.sum(axis=-1)[mask].sum())


def entropy_dissipation(traj: Trajectory, flux: FluxSpec, v_levels) -> DissipationMeasure:
    """Replay the scheme between frames, accumulating clipped residuals.

    The replay uses the trajectory's own solver configuration, so the
    micro-steps match the original run bit for bit; each frame window is
    independent, which is also what makes the accumulation parallel-safe.
    """
    v = np.asarray(v_levels, dtype=float)
    if np.any(np.diff(v) <= 0):
        raise InputError("v_levels must be sorted strictly increasing")
    lo = min(f.bounds[0] for f in traj.frames)
    hi = max(f.bounds[1] for f in traj.frames)
    w = level_widths(v)
    if v[0] - 0.5 * w[0] > lo or v[-1] + 0.5 * w[-1] < hi:
        raise InputError("level slabs must cover the trajectory value range")
    cfg = traj.config
    cfl = float(cfg.get("cfl", 0.45))
    bc = str(cfg.get("boundary", "outflow"))
    scheme = str(cfg.get("scheme", "eo"))
    grid = traj.grid
    widths = level_widths(v)
    n_win = len(traj.frames) - 1
    mass = np.zeros((n_win,) + grid.dims + (len(v),))
    clipped = np.zeros(n_win)

    def accumulate(k: int) -> None:
        target = traj.frames[k + 1]

        def on_step(prev, nxt, dt):
            r = step_residuals(prev, nxt, flux, v, "kruzhkov", bc, scheme)
            w = prev.cell_volume * dt
            mass[k] += np.moveaxis(0.5 * np.clip(-r, 0, None), 0, -1) * widths * w
            clipped[k] += float(np.clip(r, 0, None).sum()) * w

        end = advance(traj.frames[k], flux, target.time, cfl, bc, scheme, on_step=on_step)
        if not np.allclose(end.values, target.values, rtol=0, atol=1e-11):
            raise InputError(
                "replay does not reproduce the stored frames; "
                "trajectory config is inconsistent with its data"
            )

    workers = thread_count()
    if workers > 1 and n_win > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(accumulate, range(n_win)))
    else:
        for k in range(n_win):
            accumulate(k)
    return DissipationMeasure(
        frame_times=traj.times,
        origin=grid.origin,
        spacing=grid.spacing,
        v_levels=v,
        mass=mass,
        clipped_positive=float(clipped.sum()),
    )


# -- total-measure bounds ------------------------------------------------------


@dataclass(frozen=True)
class MeasureBoundsReport:
    """lhs/rhs pairs for the unit-ball and level-slab mass bounds."""

    ball_mass: float
    ball_bound: float
    ball_ok: bool
    slab_width: float
    slab_base: np.ndarray
    slab_mass: np.ndarray
    slab_bound: float
    slab_ok: bool
    max_speed: float
    l1_norm: float

    def to_dict(self) -> dict:
        return {
            "ball_mass": self.ball_mass,
            "ball_bound": self.ball_bound,
            "ball_ok": self.ball_ok,
            "slab_width": self.slab_width,
            "slab_base": self.slab_base.tolist(),
            "slab_mass": self.slab_mass.tolist(),
            "slab_bound": self.slab_bound,
            "slab_ok": self.slab_ok,
            "max_speed": self.max_speed,
            "l1_norm": self.l1_norm,
        }


def measure_bounds_check(
    measure: DissipationMeasure,
    field: ScalarField,
    flux: FluxSpec,
    delta: float,
    slab_width: float | None = None,
    center=None,
    rtol: float = 0.05,
) -> MeasureBoundsReport:
    """Check the unit-ball and v-slab mass bounds of the dissipation measure.

    field must be the space-time sample matching the measure's geometry
    (Trajectory.spacetime_field) and nonnegative; the bound constant is
    max |a| over the field's value range times 1/delta times the L1 norm of
    the field on the enlarged ball.
    """
    if delta <= 0:
        raise InputError("delta must be positive")
    if field.values.min() < -1e-10:
        raise InputError("bounds check requires a nonnegative field")
    axes_m = measure.spacetime_centers()
    if field.ndim != len(axes_m):
        raise InputError("field geometry does not match the measure's space-time cells")
    if center is None:
        dom = field.domain()
        center = [0.5 * (a + b) for a, b in dom]
    half = min(min(0.5 * (b - a) for a, b in field.domain()),)
    if half < 1 + delta:
        raise GeometryError(f"B_(1+delta) does not fit: half-extent {half} < {1 + delta}")
    lo, hi = field.bounds
    vs = np.linspace(lo, hi, 513)
    max_speed = float(np.linalg.norm(flux.a(vs), axis=-1).max())
    l1 = field.l1_norm_ball(center, 1 + delta)
    ball_mass = measure.ball_mass(center, 1.0)
    ball_bound = max_speed / delta * l1
    if slab_width is None:
        slab_width = 4.0 * float(np.mean(level_widths(measure.v_levels)))
    base = measure.v_levels[:: max(1, len(measure.v_levels) // 16)]
    slab_mass = np.array(
        [measure.ball_mass(center, 1.0, level_range=(v0, v0 + slab_width)) for v0 in base]
    )
    slab_bound = max_speed / delta * slab_width * l1
    tol_abs = 1e-12
    return MeasureBoundsReport(
        ball_mass=ball_mass,
        ball_bound=ball_bound,
        ball_ok=bool(ball_mass <= ball_bound * (1 + rtol) + tol_abs),
        slab_width=float(slab_width),
        slab_base=base,
        slab_mass=slab_mass,
        slab_bound=slab_bound,
        slab_ok=bool(np.all(slab_mass <= slab_bound * (1 + rtol) + tol_abs)),
        max_speed=max_speed,
        l1_norm=l1,
    )


# -- sparse CSV format ---------------------------------------------------------


def write_measure_csv(measure: DissipationMeasure, path, threshold: float = 0.0) -> None:
    """Sparse rows (t_index, cell_index, level_index, mass); cell_index is
    the row-major flattened spatial index."""
    n_win = measure.mass.shape[0]
    n_lev = measure.mass.shape[-1]
    flat = measure.mass.reshape(n_win, -1, n_lev)
    with open(path, "w") as fh:
        fh.write("t_index,cell_index,level_index,mass\n")
        t_idx, c_idx, l_idx = np.nonzero(flat > threshold)
        for t, c, l in zip(t_idx, c_idx, l_idx):
            fh.write(f"{t},{c},{l},{flat[t, c, l]!r}\n")


def read_measure_csv(path, like: DissipationMeasure) -> DissipationMeasure:
    """Read a sparse measure CSV into the geometry of `like`."""
    mass = np.zeros_like(like.mass)
    n_win, n_lev = mass.shape[0], mass.shape[-1]
    flat = mass.reshape(n_win, -1, n_lev)
    data = np.genfromtxt(path, delimiter=",", names=True)
    rows = np.atleast_1d(data)
    for row in rows:
        flat[int(row["t_index"]), int(row["cell_index"]), int(row["level_index"])] = row["mass"]
    return DissipationMeasure(
        frame_times=like.frame_times,
        origin=like.origin,
        spacing=like.spacing,
        v_levels=like.v_levels,
        mass=mass,
        clipped_positive=like.clipped_positive,
    )
