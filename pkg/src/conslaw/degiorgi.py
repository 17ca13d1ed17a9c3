"""Truncation-ladder machinery behind the local oscillation estimate.

The ladder couples truncation levels l_k = (1 - 2^-k) U with shrinking
balls of radius r_k = 1 + 2^-k; the masses A_k of the truncations are
nonincreasing, and their collapse certifies a sup bound on the unit ball
in terms of integral data on the double ball.  The constants of the
continuum estimate come from an unquantified averaging inequality, so the
|u|_Linf(B1) <= C |u|_L1(B2)^gamma oscillation bound is treated as an
empirical fit over solution libraries, not a closed form.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import ndimage

from .errors import InputError
from .fields import ScalarField
from .structure import _ball_footprint


@dataclass(frozen=True)
class TruncationLadder:
    """Levels, radii and truncation masses of one De Giorgi ladder."""

    U: float
    levels: np.ndarray  # l_k = (1 - 2^-k) U
    radii: np.ndarray  # r_k = 1 + 2^-k
    A: np.ndarray  # integral of (u - l_k)_+ over B_{r_k}

    def to_rows(self):
        return [
            (k, float(self.levels[k]), float(self.radii[k]), float(self.A[k]))
            for k in range(len(self.A))
        ]


def truncation_ladder(
    field: ScalarField, U: float, K: int = 25, center=None, tol: float = 1e-12
) -> TruncationLadder:
    """Exact cell quadrature of the ladder masses on discrete balls.

    Needs a nonnegative field whose domain contains B_2 around the center
    (default: domain center).  Balls are cell-center inclusion sets, so the
    masses are exact integrals of the piecewise-constant grid function.
    """
    if U <= 0:
        raise InputError("U must be positive")
    if not (0 < K <= 40):
        raise InputError("K must be in 1..40")
    if field.values.min() < -tol:
        raise InputError("ladder requires a nonnegative field")
    if center is None:
        center = [0.5 * (a + b) for a, b in field.domain()]
    half = min(min(c - a, b - c) for (a, b), c in zip(field.domain(), center))
    if half < 2.0:
        raise InputError("B_2 must be inscribed in the domain")
    ks = np.arange(K + 1)
    levels = (1.0 - 0.5**ks) * U
    radii = 1.0 + 0.5**ks
    vol = field.cell_volume
    A = np.empty(K + 1)
    for k in ks:
        mask = field.ball_mask(center, radii[k])
        A[k] = np.clip(field.values[mask] - levels[k], 0.0, None).sum() * vol
    return TruncationLadder(U=float(U), levels=levels, radii=radii, A=A)


@dataclass(frozen=True)
class OscillationFit:
    """Empirical constants for sup(B1) <= C * mass(B2)^gamma over a library."""

    gamma: float
    C: float
    gamma_grid: np.ndarray
    C_of_gamma: np.ndarray
    sup_norms: np.ndarray
    l1_norms: np.ndarray

    def ratios(self, gamma: float | None = None) -> np.ndarray:
        g = self.gamma if gamma is None else gamma
        return self.sup_norms / np.maximum(self.l1_norms, 1e-300) ** g


def oscillation_bound_check(
    fields: Sequence[ScalarField],
    gamma_grid,
    center=None,
    C_cap: float = 1e4,
) -> OscillationFit:
    """Fit the smallest C per gamma and pick the largest workable gamma.

    For each field, pairs (sup over B1, mass over B2) are measured around
    the given center; C(gamma) is the max of sup / mass^gamma.  The
    reported gamma is the largest grid value whose C stays below C_cap
    (every C is finite on a finite library, so the cap is what rules out
    exponents the data cannot support).
    """
    gamma_grid = np.asarray(sorted(gamma_grid), dtype=float)
    if len(fields) == 0:
        raise InputError("empty field library")
    if np.any(gamma_grid <= 0) or np.any(gamma_grid > 1):
        raise InputError("gamma grid must lie in (0, 1]")
    sups = []
    l1s = []
    for f in fields:
        c = center or [0.5 * (a + b) for a, b in f.domain()]
        sups.append(f.sup_norm_ball(c, 1.0))
        l1s.append(f.l1_norm_ball(c, 2.0))
    sups = np.array(sups)
    l1s = np.array(l1s)
    keep = l1s > 0
    if not keep.any():
        raise InputError("library is identically zero on B_2")
    C_of = np.array([float((sups[keep] / l1s[keep] ** g).max()) for g in gamma_grid])
    ok = C_of <= C_cap
    if not ok.any():
        best = int(np.argmin(C_of))
    else:
        best = int(np.where(ok)[0][-1])
    return OscillationFit(
        gamma=float(gamma_grid[best]),
        C=float(C_of[best]),
        gamma_grid=gamma_grid,
        C_of_gamma=C_of,
        sup_norms=sups,
        l1_norms=l1s,
    )


def sup_inf_convolution(field: ScalarField, epsilon: float) -> tuple[ScalarField, ScalarField]:
    """Morphological dilation/erosion by the discrete epsilon ball."""
    if epsilon < min(field.spacing):
        raise InputError("epsilon must be at least one cell width")
    fp = _ball_footprint(field.spacing, epsilon)
    upper = ndimage.maximum_filter(field.values, footprint=fp, mode="nearest")
    lower = ndimage.minimum_filter(field.values, footprint=fp, mode="nearest")
    return field.with_values(upper), field.with_values(lower)


def degiorgi_exponents(theta: float, d: int) -> tuple[float, float]:
    """Integrability bookkeeping of the ladder iteration.

    Picks 1/p' = (1-theta)/2 + theta/d - theta/(4d), strictly inside the
    admissible range 1/p' < (1-theta)/2 + theta/d, and returns (p',
    delta) with 1 + delta = (1+theta)/2 + 1/p'.  The margin theta/(4d)
    makes delta = 3*theta/(4d), positive for every theta in (0,1) but
    collapsing as theta -> 0, which is why the averaging gain theta must
    stay bounded away from zero for the iteration to close.
    """
    if not (0 < theta < 1):
        raise InputError("theta must be in (0, 1)")
    if d < 1:
        raise InputError("d must be >= 1")
    inv_p_prime = (1 - theta) / 2 + theta / d - theta / (4 * d)
    delta = (1 + theta) / 2 + inv_p_prime - 1
    assert delta > 0
    return 1.0 / inv_p_prime, delta
