"""Flux nonlinearity: catalogue, degeneracy exponent, spanning order.

The central objects are the wave-speed map a = A' and its derivatives.
Quantitative nondegeneracy is measured two ways that agree for smooth a:

* sublevel scaling: |{v : |a(v).xi| < delta}| <= C delta^alpha for every
  unit xi, estimated here by a log-log fit over a delta grid;
* spanning order: the smallest m such that {a(v), a'(v), ..., a^(m)(v)}
  spans R^dim at every v, with the quantitative constant
  c0 = min over (v, xi) of max_j |xi . a^(j)(v)|.

The fitted exponent satisfies alpha ~ 1/m.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import ndtri

from .errors import InputError, UnsupportedFluxError

_RANK_RTOL = 1e-10


@dataclass(frozen=True)
class FluxSpec:
    """A flux A: R -> R^dim together with analytic derivatives of a = A'.

    eval(v) returns A(v) with shape v.shape + (dim,); deriv(v, j) returns
    the j-th derivative of a, j = 0 giving a itself.  For time-augmented
    fluxes component 0 is the constant-1 time direction of a t-dependent
    law, so deriv(v, j)[..., 0] == 0 for every j >= 1.
    """

    name: str
    dim: int
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray, int], np.ndarray]
    interval: tuple[float, float]
    m_max: int
    time_augmented: bool = False

    def __post_init__(self):
        lo, hi = self.interval
        if not (np.isfinite(lo) and np.isfinite(hi) and lo < hi):
            raise InputError("flux interval must be nonempty and bounded")
        a0 = self.a(np.array(0.5 * (lo + hi)))
        if a0.shape[-1] != self.dim:
            raise InputError("deriv(v, 0) must have dim components")

    def a(self, v, j: int = 0) -> np.ndarray:
        return np.asarray(self.deriv(np.asarray(v, dtype=float), j), dtype=float)

    def A(self, v) -> np.ndarray:
        return np.asarray(self.eval(np.asarray(v, dtype=float)), dtype=float)

    @property
    def spatial_dim(self) -> int:
        return self.dim - 1 if self.time_augmented else self.dim

    def a_spatial(self, v, j: int = 0) -> np.ndarray:
        out = self.a(v, j)
        return out[..., 1:] if self.time_augmented else out

    def A_spatial(self, v) -> np.ndarray:
        out = self.A(v)
        return out[..., 1:] if self.time_augmented else out

    def max_wave_speed(self, lo: float, hi: float, samples: int = 513) -> np.ndarray:
        """Per-spatial-axis max |a_axis| over the value range [lo, hi]."""
        v = np.linspace(lo, hi, samples)
        return np.abs(self.a_spatial(v)).max(axis=0)


@dataclass(frozen=True)
class NonlinearityReport:
    """Fitted degeneracy exponent plus the spanning-order diagnostics."""

    alpha_hat: float
    C_hat: float
    m_hat: int
    c0_hat: float
    sample_grid: str
    degenerate: bool = False

    def __post_init__(self):
        if not self.degenerate and not (0.0 < self.alpha_hat <= 1.0):
            raise InputError(f"alpha_hat={self.alpha_hat} outside (0, 1]")
        if self.c0_hat < 0:
            raise InputError("c0_hat must be nonnegative")

    def to_json(self) -> str:
        return json.dumps(
            {
                "alpha_hat": self.alpha_hat,
                "C_hat": self.C_hat,
                "m_hat": self.m_hat,
                "c0_hat": self.c0_hat,
                "sample_grid": self.sample_grid,
                "degenerate": self.degenerate,
            },
            sort_keys=True,
        )


# -- catalogue ---------------------------------------------------------------


def _power_deriv(m: int):
    # j-th derivative of v^m: m!/(m-j)! v^(m-j), zero for j > m
    def d(v, j):
        v = np.asarray(v, dtype=float)
        if j > m:
            return np.zeros_like(v)
        c = math.factorial(m) / math.factorial(m - j)
        return c * v ** (m - j)

    return d


def make_power(m: int, interval=(-1.0, 1.0), name: str | None = None) -> FluxSpec:
    """1D law u_t + (u^(m+1)/(m+1))_x = 0 as the time-augmented pair (1, v^m)."""
    if m < 1:
        raise InputError("power flux needs m >= 1")
    dm = _power_deriv(m)

    def A(v):
        v = np.asarray(v, dtype=float)
        return np.stack([v, v ** (m + 1) / (m + 1)], axis=-1)

    def deriv(v, j):
        v = np.asarray(v, dtype=float)
        t = np.ones_like(v) if j == 0 else np.zeros_like(v)
        return np.stack([t, dm(v, j)], axis=-1)

    return FluxSpec(
        name=name or f"power:{m}",
        dim=2,
        eval=A,
        deriv=deriv,
        interval=interval,
        m_max=max(m + 1, 3),
        time_augmented=True,
    )


def make_burgers(interval=(-1.0, 1.0)) -> FluxSpec:
    return make_power(1, interval=interval, name="burgers")


def make_generalized_burgers(d: int, interval=(-1.0, 1.0)) -> FluxSpec:
    """u_t + sum_k u^k d_k u = 0: wave speeds (1, v, v^2, ..., v^d)."""
    if d < 1:
        raise InputError("generalized Burgers needs d >= 1")
    ds = [_power_deriv(k) for k in range(1, d + 1)]

    def A(v):
        v = np.asarray(v, dtype=float)
        cols = [v] + [v ** (k + 1) / (k + 1) for k in range(1, d + 1)]
        return np.stack(cols, axis=-1)

    def deriv(v, j):
        v = np.asarray(v, dtype=float)
        t = np.ones_like(v) if j == 0 else np.zeros_like(v)
        return np.stack([t] + [dk(v, j) for dk in ds], axis=-1)

    return FluxSpec(
        name=f"generalized_burgers:{d}",
        dim=d + 1,
        eval=A,
        deriv=deriv,
        interval=interval,
        m_max=d + 1,
        time_augmented=True,
    )


def make_trig(interval=(0.0, np.pi / 2)) -> FluxSpec:
    """Stationary 2D law with rotating wave speed a(v) = (cos v, sin v)."""

    def A(v):
        v = np.asarray(v, dtype=float)
        return np.stack([np.sin(v), 1.0 - np.cos(v)], axis=-1)

    def deriv(v, j):
        v = np.asarray(v, dtype=float) + j * np.pi / 2
        return np.stack([np.cos(v), np.sin(v)], axis=-1)

    return FluxSpec(
        name="trig", dim=2, eval=A, deriv=deriv, interval=interval, m_max=6,
        time_augmented=False,
    )


def get_flux(key: str) -> FluxSpec:
    """Resolve a catalogue key: burgers | power:m | generalized_burgers:d | trig."""
    base, _, arg = key.partition(":")
    if base == "burgers" and not arg:
        return make_burgers()
    if base == "power" and arg:
        return make_power(int(arg))
    if base == "generalized_burgers" and arg:
        return make_generalized_burgers(int(arg))
    if base == "trig" and not arg:
        return make_trig()
    raise InputError(f"unknown flux key: {key!r}")


# -- direction sampling ------------------------------------------------------


def sphere_directions(dim: int, n: int) -> np.ndarray:
    """Deterministic quasi-uniform unit vectors with antipodes collapsed.

    dim 2 uses equispaced half-circle angles, dim 3 a Fibonacci lattice,
    higher dims a Halton sequence pushed through the Gaussian map.  The
    coordinate axes are always appended: worst directions of the catalogue
    fluxes are axis-aligned and must not fall between samples.
    """
    if n < dim:
        raise InputError("need at least dim direction samples")
    if dim == 1:
        pts = np.array([[1.0]])
    elif dim == 2:
        theta = np.pi * (np.arange(n) + 0.5) / n
        pts = np.stack([np.cos(theta), np.sin(theta)], axis=-1)
    elif dim == 3:
        k = np.arange(n)
        golden = (1 + 5**0.5) / 2
        z = 1 - (k + 0.5) / n  # upper hemisphere only: antipodes collapse
        r = np.sqrt(1 - z**2)
        phi = 2 * np.pi * k / golden
        pts = np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=-1)
    else:
        pts = _halton_gaussian_sphere(dim, n)
    axes = np.eye(dim)
    pts = np.concatenate([pts, axes], axis=0)
    return pts / np.linalg.norm(pts, axis=-1, keepdims=True)


def _halton_gaussian_sphere(dim: int, n: int) -> np.ndarray:
    primes = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29][:dim]
    u = np.empty((n, dim))
    for j, p in enumerate(primes):
        u[:, j] = _van_der_corput(np.arange(1, n + 1), p)
    g = ndtri(np.clip(u, 1e-12, 1 - 1e-12))
    norms = np.linalg.norm(g, axis=-1, keepdims=True)
    norms[norms == 0] = 1.0
    return g / norms


def _van_der_corput(k: np.ndarray, base: int) -> np.ndarray:
    out = np.zeros(len(k), dtype=float)
    denom = 1.0
    k = k.copy()
    while k.max() > 0:
        denom *= base
        out += (k % base) / denom
        k //= base
    return out


# -- operations --------------------------------------------------------------


def nonlinearity_measure(
    flux: FluxSpec, xi: np.ndarray, delta: float, v_samples: int = 100_000
) -> float:
    """Lebesgue measure of {v in I : |a(v).xi| < delta}.

    Uniform sampling of |a.xi| with linear interpolation of the crossing
    points, so the error is O(|I| / v_samples) for piecewise-C1 speeds.
    """
    xi = np.asarray(xi, dtype=float)
    if abs(np.linalg.norm(xi) - 1.0) > 1e-12:
        raise InputError("xi must be a unit vector")
    if delta <= 0:
        raise InputError("delta must be positive")
    if v_samples < 2:
        raise InputError("need at least two v samples")
    lo, hi = flux.interval
    v = np.linspace(lo, hi, v_samples)
    g = np.abs(flux.a(v) @ xi) - delta  # negative inside the sublevel set
    return _sublevel_length(v, g)


def _sublevel_length(v: np.ndarray, g: np.ndarray) -> float:
    """Length of {g < 0} from nodal values, linear between nodes."""
    h = np.diff(v)
    g0, g1 = g[:-1], g[1:]
    both_neg = (g0 < 0) & (g1 < 0)
    cross_down = (g0 >= 0) & (g1 < 0)
    cross_up = (g0 < 0) & (g1 >= 0)
    frac = np.zeros_like(h)
    frac[both_neg] = 1.0
    d = g1 - g0
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(d != 0, -g0 / d, 0.0)  # root position within the segment
    frac[cross_down] = 1.0 - t[cross_down]
    frac[cross_up] = t[cross_up]
    return float((h * frac).sum())


def hormander_order(flux: FluxSpec, v_samples: int = 257) -> int:
    """Smallest m with {a(v), ..., a^(m)(v)} spanning R^dim at every sample.

    Returns m_max + 1 as a sentinel when no m works.  The sample count is
    forced odd so v = 0, where catalogue fluxes degenerate most, is hit
    exactly.
    """
    if flux.m_max < flux.dim - 1:
        raise InputError("flux must provide at least dim-1 derivatives")
    if v_samples % 2 == 0:
        v_samples += 1
    lo, hi = flux.interval
    v = np.linspace(lo, hi, v_samples)
    rows = np.stack([flux.a(v, j) for j in range(flux.m_max + 1)], axis=1)
    # rows: (n_v, m_max+1, dim)
    for m in range(flux.dim - 1, flux.m_max + 1):
        sub = rows[:, : m + 1, :]
        sv = np.linalg.svd(sub, compute_uv=False)
        full_rank = sv[:, flux.dim - 1] > _RANK_RTOL * sv[:, 0]
        if bool(full_rank.all()):
            return m
    return flux.m_max + 1


def nondegeneracy_constant(
    flux: FluxSpec, v_samples: int = 4001, xi_samples: int = 4000
) -> float:
    """min over (v, xi) of max_{0<=j<=m} |xi . a^(j)(v)| for the spanning m."""
    m = hormander_order(flux)
    if m > flux.m_max:
        return 0.0
    lo, hi = flux.interval
    v = np.linspace(lo, hi, v_samples)
    xi = sphere_directions(flux.dim, xi_samples)
    rows = np.stack([flux.a(v, j) for j in range(m + 1)], axis=1)  # (n_v, m+1, dim)
    # max over derivative order of |xi . a^(j)(v)|, then min over (v, xi)
    proj = np.abs(np.einsum("vjd,xd->vjx", rows, xi)).max(axis=1)
    return float(proj.min())


def estimate_alpha(
    flux: FluxSpec,
    xi_samples: int = 181,
    delta_grid: np.ndarray | None = None,
    v_samples: int = 100_000,
    fit_tail: int = 5,
) -> NonlinearityReport:
    """Fit the sublevel-scaling exponent over a direction sample.

    Per direction, least squares of log(measure) against log(delta) over
    the smallest fit_tail deltas with nonzero, unsaturated measure (the
    exponent is an asymptotic statement; large deltas where the sublevel
    window clips the interval endpoints would bend the fit).  The reported
    alpha is the worst (smallest) fitted slope, clipped into (0, 1].
    Directions where the measure saturates at |I| down to the smallest
    delta mark the flux as degenerate.
    """
    if delta_grid is None:
        delta_grid = np.logspace(-1.0, -3.0, 9)
    delta_grid = np.asarray(delta_grid, dtype=float)
    if not (np.all(np.diff(delta_grid) < 0) and np.all((delta_grid > 0) & (delta_grid < 1))):
        raise InputError("delta_grid must be strictly decreasing within (0, 1)")
    if xi_samples < flux.dim:
        raise InputError("need at least dim direction samples")

    lo, hi = flux.interval
    length = hi - lo
    dirs = sphere_directions(flux.dim, xi_samples)
    slopes = []
    intercepts = []
    notes = []
    degenerate = False
    for xi in dirs:
        meas = np.array([nonlinearity_measure(flux, xi, d, v_samples) for d in delta_grid])
        saturated = meas >= length * (1 - 1e-9)
        usable = (meas > 0) & ~saturated
        if saturated.all() or (saturated.any() and usable.sum() == 0):
            # sublevel set fills I down to the smallest delta: genuine
            # nonlinearity fails in this direction
            degenerate = True
            notes.append(f"direction {np.round(xi, 6).tolist()} saturates at |I|")
            slopes.append(0.0)
            intercepts.append(length)
            continue
        if usable.sum() == 0:
            # empty sublevel sets at every delta: maximally nondegenerate
            slopes.append(1.0)
            intercepts.append(0.0)
            notes.append("degenerate fit: empty sublevel sets")
            continue
        if usable.sum() == 1:
            slopes.append(1.0)
            intercepts.append(float(meas[usable][0] / delta_grid[usable][0]))
            notes.append("degenerate fit: single usable delta")
            continue
        tail = np.where(usable)[0][-max(fit_tail, 2):]  # grid is decreasing
        x = np.log(delta_grid[tail])
        y = np.log(meas[tail])
        slope, logc = np.polyfit(x, y, 1)
        slopes.append(float(slope))
        intercepts.append(float(np.exp(logc)))
    slopes = np.asarray(slopes)
    worst = int(np.argmin(slopes))
    alpha = float(min(max(slopes[worst], 0.0), 1.0))
    if alpha == 0.0 and not degenerate:
        degenerate = True
        notes.append("fitted slope collapsed to 0")
    c_hat = float(intercepts[worst])
    m_hat = hormander_order(flux)
    c0 = nondegeneracy_constant(flux) if m_hat <= flux.m_max else 0.0
    grid_desc = (
        f"xi: {len(dirs)} dirs (quasi-uniform + axes), "
        f"delta: [{delta_grid.max():g}..{delta_grid.min():g}] x{len(delta_grid)}, "
        f"v: {v_samples} uniform"
    )
    if notes:
        grid_desc += "; " + "; ".join(sorted(set(notes)))
    return NonlinearityReport(
        alpha_hat=alpha if not degenerate else max(alpha, 0.0),
        C_hat=c_hat,
        m_hat=m_hat,
        c0_hat=c0,
        sample_grid=grid_desc,
        degenerate=degenerate,
    )


def sign_decomposition(
    f: Callable[[np.ndarray], np.ndarray],
    interval: tuple[float, float],
    delta: float,
    k: int,
    samples: int = 20_001,
) -> list[tuple[tuple[float, float], str]]:
    """Split I by the sign of f^(k-1) at height delta.

    Requires f^(k) >= 1 on I (checked by sampling), which makes f^(k-1)
    strictly increasing, so I splits into at most three pieces tagged
    neg (f^(k-1) <= -delta), small (|f^(k-1)| <= delta), pos (>= delta),
    with the middle piece of length at most 2*delta.  Empty pieces are
    dropped.
    """
    if k < 1:
        raise InputError("k must be >= 1")
    if delta <= 0:
        raise InputError("delta must be positive")
    lo, hi = interval
    if hi <= lo:
        raise InputError("empty interval")
    v = np.linspace(lo, hi, samples)
    g = np.asarray(f(v), dtype=float)
    for _ in range(k - 1):
        g = np.gradient(g, v)
    gk = np.gradient(g, v)
    if np.min(gk[2:-2]) < 1.0 - 1e-6:  # skip one-sided stencil ends
        raise InputError(f"f^({k}) dips below 1 on the interval")
    if np.any(np.diff(g) <= 0):
        raise InputError(f"f^({k - 1}) is not strictly increasing")

    def crossing(level: float) -> float:
        # g increasing: unique crossing of `level`, clipped to the interval
        if g[0] >= level:
            return lo
        if g[-1] <= level:
            return hi
        i = int(np.searchsorted(g, level))
        t = (level - g[i - 1]) / (g[i] - g[i - 1])
        return float(v[i - 1] + t * (v[i] - v[i - 1]))

    a = crossing(-delta)
    b = crossing(delta)
    if b - a > 2 * delta + (hi - lo) / (samples - 1):
        raise InputError("middle interval exceeds 2*delta: derivative contract violated")
    pieces = []
    if a > lo:
        pieces.append(((lo, a), "neg"))
    if b > a:
        pieces.append(((a, b), "small"))
    if hi > b:
        pieces.append(((b, hi), "pos"))
    return pieces
