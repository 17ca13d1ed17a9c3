"""Anisotropic two-parameter scaling of the conservation law.

The linear map S_lambda dilates the direction of the j-th derivative of
the wave speed at v = 0 by lambda^j, using the lexicographically smallest
set of derivative orders whose vectors at 0 form a basis.  Rescaled
functions u_{r,lambda}(x) = u(r S_lambda x) / lambda solve the law with
wave speed S_lambda^{-1} a(lambda v), and det S_lambda = lambda^q with q
the index sum, which is what fixes the optimal decay exponent
gamma_0 = 1 / (1 + q).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConstructionError, GeometryError, InputError
from .fields import ScalarField
from .fluxes import FluxSpec

_RANK_RTOL = 1e-10


def _basis_indexes(flux: FluxSpec) -> list[int]:
    """Greedy (hence lexicographically smallest) independent derivative set
    at v = 0."""
    chosen: list[int] = []
    vecs: list[np.ndarray] = []
    for j in range(flux.m_max + 1):
        cand = vecs + [flux.a(0.0, j)]
        m = np.stack(cand)
        sv = np.linalg.svd(m, compute_uv=False)
        if sv[-1] > _RANK_RTOL * sv[0]:
            chosen.append(j)
            vecs = cand
            if len(chosen) == flux.dim:
                return chosen
    raise ConstructionError(
        "derivatives of the wave speed at 0 do not span the ambient space"
    )


def _independent_on(flux: FluxSpec, indexes, lam: float, samples: int = 129) -> bool:
    v = np.linspace(-lam, lam, samples)
    rows = np.stack([flux.a(v, j) for j in indexes], axis=1)
    sv = np.linalg.svd(rows, compute_uv=False)
    return bool(np.all(sv[:, -1] > _RANK_RTOL * sv[:, 0]))


def lambda_bound(flux: FluxSpec, scan: int = 20) -> float:
    """Largest dyadic fraction of the upper interval end at which the
    derivative basis stays independent on [-lambda, lambda]."""
    indexes = _basis_indexes(flux)
    v_hi = flux.interval[1]
    for k in range(scan):
        lam = v_hi * 0.5**k
        if _independent_on(flux, indexes, lam):
            return lam
    raise ConstructionError("no dyadic lambda keeps the derivative basis independent")


@dataclass(frozen=True)
class ScalingMap:
    """Eigen-decomposed dilation S_lambda and its bookkeeping."""

    indexes: tuple[int, ...]
    lam: float
    matrix: np.ndarray
    det: float
    q: int
    time_augmented: bool

    @property
    def inverse(self) -> np.ndarray:
        return np.linalg.inv(self.matrix)

    def spatial_matrix(self) -> np.ndarray:
        """Drop the (identically mapped) time axis of a time-augmented map."""
        if not self.time_augmented:
            return self.matrix
        return self.matrix[1:, 1:]


def build_scaling(flux: FluxSpec, lam: float) -> ScalingMap:
    """Construct S_lambda on the derivative eigenbasis at v = 0."""
    if lam <= 0:
        raise InputError("lambda must be positive")
    v0 = lambda_bound(flux)
    if lam > v0 * (1 + 1e-12) and not np.isclose(lam, 1.0):
        raise InputError(f"lambda={lam} exceeds the independence bound {v0}")
    indexes = _basis_indexes(flux)
    V = np.stack([flux.a(0.0, j) for j in indexes], axis=1)
    eig = np.array([lam ** j for j in indexes])
    matrix = V @ np.diag(eig) @ np.linalg.inv(V)
    q = int(sum(indexes))
    if flux.time_augmented:
        # time direction is the j = 0 eigenvector when a(0) = e_t; enforce
        # the identically-mapped time axis exactly
        if not np.allclose(flux.a(0.0)[1:], 0.0):
            raise ConstructionError("time-augmented flux must have a(0) = e_t")
        matrix[0, :] = 0.0
        matrix[:, 0] = 0.0
        matrix[0, 0] = 1.0
    return ScalingMap(
        indexes=tuple(indexes),
        lam=float(lam),
        matrix=matrix,
        det=float(lam**q),
        q=q,
        time_augmented=flux.time_augmented,
    )


def gamma_zero(flux: FluxSpec) -> float:
    """Optimal large-time decay exponent 1 / (1 + q), q the index sum."""
    indexes = _basis_indexes(flux)
    return 1.0 / (1 + sum(indexes))


def apply_scaling(field: ScalarField, r: float, smap: ScalingMap) -> ScalarField:
    """Sample u_{r,lambda}(x) = u(r S_lambda x) / lambda on field's own grid.

    A field with the map's full dimension is transformed with the full
    matrix; a spatial slice of a time-augmented map uses the spatial
    block.  Every target cell center must map into the source domain.
    """
    if r <= 0:
        raise InputError("r must be positive")
    if field.ndim == len(smap.matrix):
        M = smap.matrix
    elif smap.time_augmented and field.ndim == len(smap.matrix) - 1:
        M = smap.spatial_matrix()
    else:
        raise InputError("field dimension matches neither the map nor its spatial block")
    grids = np.meshgrid(*[field.axis_centers(k) for k in range(field.ndim)], indexing="ij")
    pts = np.stack(grids, axis=-1)
    src = r * (pts @ M.T)
    eps = 1e-9 * max(field.spacing)
    for k, (lo, hi) in enumerate(field.domain()):
        c = src[..., k]
        if c.min() < lo - eps or c.max() > hi + eps:
            raise GeometryError(
                f"axis {k}: image [{c.min():g}, {c.max():g}] leaves the domain [{lo:g}, {hi:g}]"
            )
    return field.with_values(field.interp(src) / smap.lam)


def rescale_flux(flux: FluxSpec, smap: ScalingMap) -> FluxSpec:
    """Wave speed of the rescaled law: a~(v) = S_lambda^{-1} a(lambda v).

    The generalized Burgers family is a fixed point of this map, which is
    what makes its decay exponent computable in closed form.
    """
    lam = smap.lam
    Minv = smap.inverse
    lo, hi = flux.interval

    def eval_A(v):
        return flux.A(lam * np.asarray(v, dtype=float)) @ Minv.T / lam

    def deriv(v, j):
        return lam**j * (flux.a(lam * np.asarray(v, dtype=float), j) @ Minv.T)

    return FluxSpec(
        name=f"{flux.name}@lam={lam:g}",
        dim=flux.dim,
        eval=eval_A,
        deriv=deriv,
        interval=(lo / lam, hi / lam),
        m_max=flux.m_max,
        time_augmented=flux.time_augmented,
    )
