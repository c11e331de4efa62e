"""scikit-learn style wrappers around the extension and the seminorms.

The "samples" here are boundary fields (``SampledField``), not rows of a
design matrix, so these estimators are meant for ``get_params`` /
``set_params`` / ``clone`` and the fit/transform protocol rather than for
``Pipeline`` with tabular data.
"""

from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .extension import default_ladder, extend
from .grid import HalfSpaceField
from .kernels import build_propagator, named_system
from .seminorms import bmo_norm, carleson_profile, osc_curve
from .validation import check_field, check_fields, check_ladder, check_positive

__all__ = ["PoissonExtension", "MeanOscillation", "CarlesonMeasure"]


class PoissonExtension(BaseEstimator, TransformerMixin):
    """Build the propagator on ``fit`` and extend fields on ``transform``.

    Parameters
    ----------
    system : str
        Name of a built-in system (``laplacian``, ``scalar_divA``, ``lame``).
    system_params : dict or None
        Keyword parameters forwarded to the system constructor.
    t_levels : sequence of float or None
        Height ladder; the default runs from h/2 to S with ratio 2^(1/4).
    with_gradient : bool
        Whether transform also returns the d+1 gradient channels.
    """

    def __init__(self, system: str = "laplacian", system_params: Optional[dict] = None,
                 t_levels: Optional[Sequence[float]] = None, with_gradient: bool = True):
        self.system = system
        self.system_params = system_params
        self.t_levels = t_levels
        self.with_gradient = with_gradient

    def fit(self, X, y=None):
        f = check_fields(X)[0]
        sys_ = named_system(self.system, f.grid.n, **(self.system_params or {}))
        if f.M != sys_.M:
            raise ValueError(f"field has M={f.M} components, system {self.system!r} has M={sys_.M}")
        self.grid_ = f.grid
        self.system_ = sys_
        self.propagator_ = build_propagator(sys_, f.grid)
        self.t_levels_ = default_ladder(f.grid) if self.t_levels is None else check_ladder(self.t_levels)
        return self

    def transform(self, X):
        """A HalfSpaceField for a single field, a list for several."""
        check_is_fitted(self, "propagator_")
        fields = check_fields(X, self.grid_, self.system_.M)
        out = [extend(f, self.propagator_, self.t_levels_, self.with_gradient) for f in fields]
        return out[0] if len(out) == 1 and not isinstance(X, (list, tuple)) else out


class MeanOscillation(BaseEstimator, TransformerMixin):
    """Dyadic mean-oscillation curve osc_p(f; r) for r = 2h, ..., S.

    ``transform`` returns an array of shape (n_fields, n_radii).  ``fit``
    only records the radii, so the estimator is stateless apart from the grid.
    """

    def __init__(self, p: float = 1.0, sliding: bool = True):
        self.p = p
        self.sliding = sliding

    def fit(self, X, y=None):
        check_positive(self.p, "p")
        f = check_fields(X)[0]
        self.grid_ = f.grid
        self.radii_ = osc_curve(f, self.p, self.sliding).radii
        return self

    def transform(self, X):
        check_is_fitted(self, "radii_")
        return np.array([osc_curve(f, self.p, self.sliding).values for f in check_fields(X, self.grid_)])

    def score(self, X, y=None) -> float:
        """Negative largest BMO norm, so that smoother data scores higher."""
        return -max(bmo_norm(f, self.p, self.sliding) for f in check_fields(X))


class CarlesonMeasure(BaseEstimator, TransformerMixin):
    """Carleson profile of the Poisson extension: sup over cubes of side at
    most r of (|Q|^-1 int_{T(Q)} |grad u|^2 t)^(1/2), for dyadic r.

    Accepts boundary fields (extended with the fitted propagator) or
    precomputed HalfSpaceFields.
    """

    def __init__(self, system: str = "laplacian", system_params: Optional[dict] = None,
                 channels: Optional[Sequence[int]] = None, t_levels: Optional[Sequence[float]] = None):
        self.system = system
        self.system_params = system_params
        self.channels = channels
        self.t_levels = t_levels

    def fit(self, X, y=None):
        first = X[0] if isinstance(X, (list, tuple)) else X
        if isinstance(first, HalfSpaceField):
            self.extension_ = None
            self.grid_ = first.grid
        else:
            self.extension_ = PoissonExtension(self.system, self.system_params, self.t_levels, True).fit(first)
            self.grid_ = self.extension_.grid_
        return self

    def _halfspace(self, X):
        items = list(X) if isinstance(X, (list, tuple)) else [X]
        out = []
        for x in items:
            if isinstance(x, HalfSpaceField):
                out.append(x)
            else:
                if self.extension_ is None:
                    raise ValueError("fitted on half-space fields; cannot extend boundary data")
                out.append(self.extension_.transform(check_field(x, self.grid_)))
        return out

    def transform(self, X):
        check_is_fitted(self, "grid_")
        profs = [carleson_profile(u, self.channels) for u in self._halfspace(X)]
        self.radii_ = profs[0].radii
        return np.array([p.values for p in profs])

    def norms(self, X) -> np.ndarray:
        return self.transform(X)[:, -1]
