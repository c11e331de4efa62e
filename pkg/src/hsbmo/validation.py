"""Input checks shared by the estimators."""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np

from .grid import BoundaryGrid, HalfSpaceField, SampledField

__all__ = ["check_field", "check_fields", "check_ladder", "check_positive", "check_same_grid"]


def check_positive(value, name: str) -> float:
    v = float(value)
    if not np.isfinite(v) or v <= 0:
        raise ValueError(f"{name} must be a positive finite number, got {value!r}")
    return v


def check_field(X, grid: Optional[BoundaryGrid] = None, M: Optional[int] = None) -> SampledField:
    """Accept a SampledField, or a raw array together with its grid.

    A bare array must have shape ``grid.shape`` or ``grid.shape + (M,)``.
    """
    if isinstance(X, SampledField):
        f = X
        if grid is not None and f.grid != grid:
            raise ValueError(f"field lives on {f.grid.to_dict()}, expected {grid.to_dict()}")
    else:
        if grid is None:
            raise TypeError("a raw array needs a grid; pass a SampledField or set grid=")
        f = SampledField(grid, np.asarray(X))
    if M is not None and f.M != M:
        raise ValueError(f"field has M={f.M} components, expected {M}")
    return f


def check_fields(X, grid: Optional[BoundaryGrid] = None, M: Optional[int] = None) -> list:
    """One field or a sequence of fields, returned as a list."""
    if isinstance(X, SampledField) or (isinstance(X, np.ndarray) and grid is not None and X.shape[:grid.d] == grid.shape):
        return [check_field(X, grid, M)]
    items = list(X)
    if not items:
        raise ValueError("no fields given")
    return [check_field(x, grid, M) for x in items]


def check_ladder(t: Sequence[float]) -> np.ndarray:
    t = np.asarray(t, float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t ladder must be a non-empty 1-D sequence")
    if t[0] <= 0 or np.any(np.diff(t) <= 0) or not np.all(np.isfinite(t)):
        raise ValueError("t ladder must be positive, finite and strictly increasing")
    return t


def check_same_grid(*objs) -> BoundaryGrid:
    grids = [o.grid for o in objs if isinstance(o, (SampledField, HalfSpaceField))]
    if not grids:
        raise ValueError("nothing to compare")
    if any(g != grids[0] for g in grids[1:]):
        raise ValueError("inputs live on different grids")
    return grids[0]
