"""Structural diagnostics: envelopes, jump set, oscillation, shock fits.

All limits r -> 0 of the continuum theory become finite dyadic radius
scans with recorded monotone trends; the run-specific grid floor is the
scale below which those trends are numerical noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import GeometryError, InputError
from .fields import ScalarField
from .kinetic import DissipationMeasure


def _ball_footprint(spacing, radius: float) -> np.ndarray:
    """Cell-center inclusion footprint of the ball of given physical radius."""
    half = [int(np.floor(radius / s + 1e-12)) for s in spacing]
    grids = np.meshgrid(
        *[np.arange(-h, h + 1) * s for h, s in zip(half, spacing)], indexing="ij"
    )
    d2 = sum(g**2 for g in grids)
    fp = d2 <= radius * radius * (1 + 1e-12)
    if not fp.any():
        raise InputError(f"radius {radius} is below the grid resolution")
    return fp


@dataclass(frozen=True)
class EnvelopePair:
    """Lower/upper envelopes at the smallest radius plus the full scan."""

    lower: ScalarField
    upper: ScalarField
    radii_used: tuple[float, ...]
    per_radius: tuple[tuple[float, ScalarField, ScalarField], ...]


def semicontinuous_envelopes(field: ScalarField, radii) -> EnvelopePair:
    """Min/max filters over shrinking balls (domain-restricted at edges).

    The returned pair belongs to the smallest radius; the recorded scan
    lets callers assert that upper is nonincreasing and lower is
    nondecreasing as r decreases.
    """
    radii = sorted((float(r) for r in radii), reverse=True)
    if len(radii) == 0 or any(r1 >= r0 for r0, r1 in zip(radii, radii[1:])):
        raise InputError("radii must be strictly decreasing")
    if radii[-1] < min(field.spacing):
        raise InputError("smallest radius is below one cell")
    scan = []
    for r in radii:
        fp = _ball_footprint(field.spacing, r)
        lo = ndimage.minimum_filter(field.values, footprint=fp, mode="nearest")
        hi = ndimage.maximum_filter(field.values, footprint=fp, mode="nearest")
        scan.append((r, field.with_values(lo), field.with_values(hi)))
    _, lower, upper = scan[-1]
    return EnvelopePair(lower, upper, tuple(radii), tuple(scan))


@dataclass(frozen=True)
class JumpMask:
    """Cells where the dissipation mass scales like a codimension-one set."""

    flagged: np.ndarray  # bool, space-time cell structure of the measure
    threshold: float
    radii: tuple[float, ...]
    ratios: np.ndarray  # max over radii of mu(B_r)/r^(D-1)

    def flagged_indices(self) -> np.ndarray:
        return np.argwhere(self.flagged)

    def to_json(self) -> str:
        return json.dumps(
            {
                "threshold": self.threshold,
                "radii": list(self.radii),
                "n_flagged": int(self.flagged.sum()),
                "flagged": [list(map(int, ij)) for ij in np.argwhere(self.flagged)],
            },
            sort_keys=True,
        )


def auto_threshold(value_range: float) -> float:
    """Default flag threshold 0.01 * range^3 (shock of height h carries
    dissipation ~ h^3/12 per unit time for quadratic fluxes)."""
    return 0.01 * value_range**3


def jump_set(measure: DissipationMeasure, radii, threshold: float) -> JumpMask:
    """Flag space-time cells with mu(B_r x R)/r^(D-1) >= threshold for some r.

    D is the space-time dimension of the measure's cell structure; ball
    sums are taken over cell centers, so radii live in physical units and
    should stay dyadic multiples of the cell size.
    """
    if threshold <= 0:
        raise InputError("threshold must be positive")
    radii = tuple(float(r) for r in radii)
    if len(radii) == 0:
        raise InputError("need at least one radius")
    per_cell = measure.per_cell()
    dt = float(np.diff(measure.frame_times).mean())
    dts = np.diff(measure.frame_times)
    if not np.allclose(dts, dt, rtol=1e-6, atol=1e-12):
        raise InputError("jump_set needs uniformly spaced frame windows")
    spacing = (dt,) + measure.spacing
    D = per_cell.ndim
    ratios = np.zeros_like(per_cell)
    for r in radii:
        fp = _ball_footprint(spacing, r)
        ball = ndimage.convolve(per_cell, fp.astype(float), mode="constant", cval=0.0)
        ratios = np.maximum(ratios, ball / r ** (D - 1))
    return JumpMask(ratios >= threshold, float(threshold), radii, ratios)


def oscillation_modulus(field: ScalarField, x, radii) -> tuple[np.ndarray, np.ndarray]:
    """osc and VMO sequences over shrinking balls centered at x.

    osc(r) = max - min over the ball; VMO(r) = mean |u - ball mean|.
    """
    radii = [float(r) for r in radii]
    osc = []
    vmo = []
    for r in radii:
        vals = field.ball_values(x, r)
        osc.append(float(vals.max() - vals.min()))
        vmo.append(float(np.abs(vals - vals.mean()).mean()))
    return np.array(osc), np.array(vmo)


@dataclass(frozen=True)
class ShockFit:
    """Best single-shock profile of shrinking-ball restrictions of a field."""

    center: tuple[float, ...]
    normal: np.ndarray
    u_plus: float
    u_minus: float
    residual: np.ndarray  # L1 fit error per radius
    radii: tuple[float, ...]
    cone_dev_plus: np.ndarray  # nontangential deviation from u_plus per radius
    cone_dev_minus: np.ndarray
    single_shock: bool

    def __post_init__(self):
        if self.u_plus < self.u_minus:
            raise InputError("u_plus must dominate u_minus")

    def to_json(self) -> str:
        return json.dumps(
            {
                "center": list(self.center),
                "normal": self.normal.tolist(),
                "u_plus": self.u_plus,
                "u_minus": self.u_minus,
                "residual": self.residual.tolist(),
                "radii": list(self.radii),
                "single_shock": self.single_shock,
            },
            sort_keys=True,
        )


def _direction_grid(ndim: int, n: int = 180) -> np.ndarray:
    if ndim == 1:
        return np.array([[1.0], [-1.0]])
    theta = np.pi * np.arange(n) / n
    full = np.concatenate([theta, theta + np.pi])
    return np.stack([np.cos(full), np.sin(full)], axis=-1)


def blowup_trace(
    field: ScalarField, x0, radii, collar: float = 0.1, n_directions: int = 180
) -> ShockFit:
    """Fit u near x0 by a single shock at each radius.

    For every direction on the grid, u+/u- are the means over the two
    half-balls beyond a collar of relative width `collar`; the direction
    minimizing the L1 distance to the two-state profile at the smallest
    radius wins.  Cone deviations record the nontangential convergence of
    u to u+/u- inside the cones {(y - x0).n >< +-collar |y - x0|}.
    """
    radii = sorted((float(r) for r in radii), reverse=True)
    x0 = tuple(float(c) for c in x0) if np.ndim(x0) else (float(x0),)
    dom = field.domain()
    for (lo, hi), c in zip(dom, x0):
        if not (lo < c < hi):
            raise GeometryError("x0 must be interior")
    dirs = _direction_grid(field.ndim, n_directions)
    grids = np.meshgrid(*[field.axis_centers(k) for k in range(field.ndim)], indexing="ij")
    offsets = np.stack([g - c for g, c in zip(grids, x0)], axis=-1)
    dist = np.linalg.norm(offsets, axis=-1)

    best = None
    for n_vec in dirs:
        proj = offsets @ n_vec
        resid = np.zeros(len(radii))
        up = um = None
        ok = True
        for ri, r in enumerate(radii):
            ball = dist <= r * (1 + 1e-12)
            plus = ball & (proj > collar * r)
            minus = ball & (proj < -collar * r)
            if not plus.any() or not minus.any():
                ok = False
                break
            up_r = float(field.values[plus].mean())
            um_r = float(field.values[minus].mean())
            profile = np.where(proj > 0, up_r, um_r)
            resid[ri] = float(np.abs(field.values[ball] - profile[ball]).mean())
            if ri == len(radii) - 1:
                up, um = up_r, um_r
        if not ok:
            continue
        if best is None or resid[-1] < best[0][-1]:
            best = (resid, n_vec, up, um)
    if best is None:
        raise GeometryError("no radius leaves room for half-ball averages")
    resid, n_vec, up, um = best
    if um > up:
        up, um = um, up
        n_vec = -n_vec
    cone_p = np.zeros(len(radii))
    cone_m = np.zeros(len(radii))
    proj = offsets @ n_vec
    for ri, r in enumerate(radii):
        ball = dist <= r * (1 + 1e-12)
        cp = ball & (proj > collar * dist)
        cm = ball & (proj < -collar * dist)
        cone_p[ri] = float(np.abs(field.values[cp] - up).max()) if cp.any() else np.nan
        cone_m[ri] = float(np.abs(field.values[cm] - um).max()) if cm.any() else np.nan
    jump = up - um
    single = bool(np.any(resid <= 0.5 * jump)) if jump > 0 else False
    return ShockFit(
        center=x0,
        normal=n_vec,
        u_plus=up,
        u_minus=um,
        residual=resid,
        radii=tuple(radii),
        cone_dev_plus=cone_p,
        cone_dev_minus=cone_m,
        single_shock=single,
    )
