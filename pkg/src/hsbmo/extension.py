"""Poisson extension u(x', t) = (P_t * f)(x') with exact spectral gradients."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .grid import BoundaryGrid, HalfSpaceField, SampledField, geometric_ladder
from .kernels import PoissonPropagator

__all__ = [
    "ExtensionRequest",
    "default_ladder",
    "extend",
    "extend_levels",
    "vertical_shift",
    "nontangential_trace",
]

LADDER_RATIO = 2 ** 0.25


def default_ladder(grid: BoundaryGrid, t_min: Optional[float] = None,
                   ratio: float = LADDER_RATIO, t_max: Optional[float] = None) -> np.ndarray:
    """Geometric ladder from h/2 up to S; with ratio 2^(1/4) every dyadic side 2^l h is a level."""
    t_min = grid.h / 2 if t_min is None else t_min
    t_max = grid.S if t_max is None else t_max
    return geometric_ladder(t_min, ratio, t_max * (1 + 1e-12))


@dataclass(frozen=True, eq=False)
class ExtensionRequest:
    f: SampledField
    prop: PoissonPropagator
    t_levels: Sequence[float]
    with_gradient: bool = True
    kappa: float = 1.0

    def __post_init__(self):
        if self.f.grid != self.prop.grid:
            raise ValueError("field and propagator live on different grids")
        if self.f.M != self.prop.M:
            raise ValueError(f"field has M={self.f.M} components, system has M={self.prop.M}")
        if not self.kappa > 0:
            raise ValueError("cone aperture kappa must be positive")


def _spectral_derivative_factors(grid: BoundaryGrid) -> np.ndarray:
    # i xi_j with the Nyquist mode zeroed, shape (d, *shape)
    xi = np.where(grid.nyquist_mask(), 0.0, grid.frequencies())
    return np.moveaxis(1j * xi, -1, 0)


def extend_levels(f: SampledField, prop: PoissonPropagator, t_levels: Sequence[float],
                  with_gradient: bool = True):
    """Raw arrays (values, gradient) of the extension at the given heights."""
    req = ExtensionRequest(f, prop, t_levels, with_gradient)
    grid = f.grid
    axes = tuple(range(grid.d))
    F = np.fft.fftn(req.f.values, axes=axes)[..., None]
    t = np.asarray(t_levels, float)
    vals = np.empty((t.size,) + f.values.shape, complex)
    grad = np.empty((grid.d + 1,) + vals.shape, complex) if with_gradient else None
    dfac = _spectral_derivative_factors(grid)[..., None] if with_gradient else None
    for k, tk in enumerate(t):
        U = (prop.propagator(tk) @ F)[..., 0]
        vals[k] = np.fft.ifftn(U, axes=axes)
        if with_gradient:
            for j in range(grid.d):
                grad[j, k] = np.fft.ifftn(dfac[j] * U, axes=axes)
            grad[grid.d, k] = np.fft.ifftn((prop.solvents @ U[..., None])[..., 0], axes=axes)
    return vals, grad


def extend(f: SampledField, prop: PoissonPropagator, t_levels: Optional[Sequence[float]] = None,
           with_gradient: bool = True) -> HalfSpaceField:
    """u(., t) = P_t * f on every ladder level, with d_j u and d_t u when requested."""
    if t_levels is None:
        t_levels = prop.t_levels or default_ladder(prop.grid)
    t_levels = np.asarray(t_levels, float)
    vals, grad = extend_levels(f, prop, t_levels, with_gradient)
    return HalfSpaceField(f.grid, t_levels, vals, grad, source=(f, prop))


def vertical_shift(u: HalfSpaceField, eps: float) -> HalfSpaceField:
    """u_eps(x', t) = u(x', t + eps) on the same ladder, by re-extension."""
    if eps < 0:
        raise ValueError("vertical shift must be nonnegative")
    if u.source is None:
        raise ValueError("vertical_shift needs a field produced by extend()")
    if eps == 0:
        return u
    f, prop = u.source
    vals, grad = extend_levels(f, prop, u.t_levels + eps, u.gradient is not None)
    return HalfSpaceField(u.grid, u.t_levels, vals, grad, source=u.source)


def _cone_offsets(grid: BoundaryGrid, radius: float, limit: int) -> np.ndarray:
    r = int(np.ceil(radius / grid.h))
    rng = np.arange(-r, r + 1)
    offs = np.stack(np.meshgrid(*([rng] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
    dist = grid.h * np.sqrt((offs ** 2).sum(axis=1))
    keep = dist < radius
    offs, dist = offs[keep], dist[keep]
    order = np.lexsort(tuple(offs.T[::-1]) + (dist,))
    return offs[order[:limit]]


def nontangential_trace(u: HalfSpaceField, kappa: float = 1.0, depth: float = 8.0,
                        max_points: int = 32):
    """Trace u(., t_min) and a per-node cone convergence diagnostic.

    The diagnostic at x' is the largest |u(y', t) - u(x', t_min)| over the
    ``max_points`` lattice points nearest to x' in the cone |y' - x'| < kappa t
    on every level t <= depth * t_min.
    """
    grid = u.grid
    t_min = float(u.t_levels[0])
    if t_min > 4 * grid.h:
        raise ValueError(f"ladder too coarse near the boundary: need t_min <= {4 * grid.h}, got {t_min}")
    if not kappa > 0:
        raise ValueError("cone aperture kappa must be positive")
    trace = u.values[0]
    diag = np.zeros(grid.shape)
    axes = tuple(range(grid.d))
    for k, t in enumerate(u.t_levels):
        if t > depth * t_min * (1 + 1e-12):
            break
        for off in _cone_offsets(grid, kappa * t, max_points):
            shifted = np.roll(u.values[k], tuple(int(-o) for o in off), axis=axes)
            diag = np.maximum(diag, np.sqrt((np.abs(shifted - trace) ** 2).sum(axis=-1)))
    return SampledField(grid, trace), diag
