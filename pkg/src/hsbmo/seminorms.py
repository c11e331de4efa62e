"""Boundary and half-space functionals: mean oscillation, Morrey-Campanato,
Hoelder, and Carleson norms of Littlewood-Paley measures.

Every supremum runs over the sliding dyadic-side family: cubes of side
2^l h (l = 0 .. log2(N/2)) with corners at every lattice node, so results
are exactly covariant under lattice translations.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import _sweeps
from ._threads import parallel_map
from .grid import BoundaryGrid, HalfSpaceField, SampledField

__all__ = [
    "OscillationCurve",
    "CarlesonProfile",
    "decay_verdict",
    "level_oscillations",
    "bmo_norm",
    "osc_curve",
    "morrey_campanato",
    "holder_seminorm",
    "pair_difference_table",
    "random_pair_differences",
    "carleson_profile",
    "carleson_norm",
    "fractional_carleson",
    "box_integrals",
    "vanishing_carleson_test",
    "oscillation_tail",
    "fit_loglog_slope",
    "MAX_LADDER_RATIO",
]

MAX_LADDER_RATIO = 1.2
REAL_TOL = 1e-12
VANISHING = "vanishing"
NOT_VANISHING = "not_vanishing"
INCONCLUSIVE = "inconclusive"


def decay_verdict(small: float, large: float, vanish: float = 0.1,
                  persist: float = 0.5) -> str:
    """Classify the ratio small/large: at most ``vanish`` means vanishing,
    at least ``persist`` means not vanishing, anything between is inconclusive."""
    if not 0 < vanish <= persist:
        raise ValueError("thresholds must satisfy 0 < vanish <= persist")
    if large <= 0:
        return VANISHING
    ratio = small / large
    if ratio <= vanish:
        return VANISHING
    if ratio >= persist:
        return NOT_VANISHING
    return INCONCLUSIVE


def fit_loglog_slope(x: Sequence[float], y: Sequence[float]) -> float:
    """Least-squares slope of log y against log x (positive entries only)."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    keep = (x > 0) & (y > 0)
    if keep.sum() < 2:
        raise ValueError("need at least two positive points to fit a slope")
    return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])


# ---------------------------------------------------------------------------
# oscillation sweeps

_LEVEL_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _check_p(p: float) -> float:
    p = float(p)
    if p not in (1.0, 2.0):
        raise ValueError("only p = 1 and p = 2 are supported")
    return p


def _strided_level(values: np.ndarray, grid: BoundaryGrid, w: int, p: float) -> float:
    M = values.shape[-1]
    nb = grid.N // w
    if grid.d == 1:
        blocks = values.reshape(nb, w, M)
        dev = blocks - blocks.mean(axis=1, keepdims=True)
        mag = np.sqrt((np.abs(dev) ** 2).sum(axis=-1))
        return float(((mag ** p).mean(axis=1) ** (1 / p)).max())
    blocks = values.reshape(nb, w, nb, w, M)
    dev = blocks - blocks.mean(axis=(1, 3), keepdims=True)
    mag = np.sqrt((np.abs(dev) ** 2).sum(axis=-1))
    return float(((mag ** p).mean(axis=(1, 3)) ** (1 / p)).max())


def _prefix_level_l2(values: np.ndarray, grid: BoundaryGrid, w: int) -> float:
    # L^2 oscillation from window moments; centring first limits cancellation
    c = values - values.reshape(-1, values.shape[-1]).mean(axis=0)
    m1 = np.stack([_window_means(c[..., k], w, grid.d) for k in range(c.shape[-1])], axis=-1)
    m2 = _window_means((np.abs(c) ** 2).sum(axis=-1), w, grid.d)
    var = m2 - (np.abs(m1) ** 2).sum(axis=-1)
    return float(np.sqrt(max(var.max(), 0.0)))


def _sliding_level(values: np.ndarray, grid: BoundaryGrid, w: int, p: float) -> float:
    if p == 2.0:
        return _prefix_level_l2(values, grid, w)
    # oscillations ignore constants; centring keeps prefix sums small
    values = values - values.reshape(-1, values.shape[-1]).mean(axis=0)
    pad = [(0, w - 1)] * grid.d + [(0, 0)]
    fe = np.pad(values, pad, mode="wrap")
    # round-off imaginary parts (e.g. from FFT filtering of real data) are
    # dropped; they shift the oscillation by at most their own size
    if values.shape[-1] == 1 and np.abs(values.imag).max() <= REAL_TOL * max(np.abs(values.real).max(), 1e-300):
        fe = np.ascontiguousarray(fe[..., 0].real)
        kern = _sweeps.osc_sup_real_1d if grid.d == 1 else _sweeps.osc_sup_real_2d
    else:
        fe = np.ascontiguousarray(fe)
        kern = _sweeps.osc_sup_complex_1d if grid.d == 1 else _sweeps.osc_sup_complex_2d
    return float(kern(fe, grid.N, w, p)[0])


def level_oscillations(f: SampledField, p: float = 1.0, sliding: bool = True) -> np.ndarray:
    """Per-level suprema of the L^p mean oscillation, index l <-> side 2^l h.

    p = 1 runs the exhaustive compiled sweep; p = 2 uses window moments
    from periodic prefix sums, which is exact up to rounding and costs
    O(N^d) per level.
    """
    p = _check_p(p)
    per_field = _LEVEL_CACHE.setdefault(f, {})
    key = (p, bool(sliding))
    if key in per_field:
        return per_field[key]
    grid = f.grid
    values = f.values
    widths = [2 ** l for l in range(grid.max_level + 1)]

    def one(w):
        if w == 1:
            return 0.0
        if not sliding:
            return _strided_level(values, grid, w, p)
        return _sliding_level(values, grid, w, p)

    # largest windows first keeps the pool busy
    order = sorted(range(len(widths)), key=lambda i: -widths[i])
    res = parallel_map(lambda i: one(widths[i]), order)
    out = np.empty(len(widths))
    out[order] = res
    out.setflags(write=False)
    per_field[key] = out
    return out


def bmo_norm(f: SampledField, p: float = 1.0, sliding: bool = True) -> float:
    """Supremum of the L^p mean oscillation over every cube of side at most S."""
    return float(level_oscillations(f, p, sliding).max())


@dataclass(frozen=True)
class OscillationCurve:
    radii: np.ndarray
    values: np.ndarray
    p: float = 1.0

    @property
    def bmo(self) -> float:
        return float(self.values[-1])

    def vmo_verdict(self, threshold: float = 0.05) -> bool:
        """True when the value at the smallest radius is at most threshold * bmo."""
        return bool(self.values[0] <= threshold * self.bmo)

    def to_rows(self):
        return [(float(r), float(v)) for r, v in zip(self.radii, self.values)]


def osc_curve(f: SampledField, p: float = 1.0, sliding: bool = True) -> OscillationCurve:
    """osc_p(f; r) at the dyadic radii r = 2h, 4h, ..., S.

    Side h is left out because a one-node cube has no oscillation.
    """
    lev = level_oscillations(f, p, sliding)
    vals = np.maximum.accumulate(lev)[1:]
    radii = f.grid.h * 2.0 ** np.arange(1, lev.size)
    return OscillationCurve(radii, vals, p)


def morrey_campanato(f: SampledField, eta: float, p: float = 1.0, sliding: bool = True) -> float:
    """sup over cubes of l(Q)^(-eta) (mean |f - f_Q|^p)^(1/p)."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    lev = level_oscillations(f, p, sliding)
    sides = f.grid.h * 2.0 ** np.arange(lev.size)
    return float((lev * sides ** (-eta)).max())


def _near_offsets(grid: BoundaryGrid, radius: int) -> np.ndarray:
    r = min(radius, grid.N // 2)
    rng = np.arange(-r, r + 1)
    offs = np.stack(np.meshgrid(*([rng] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
    # one representative of each +-o pair
    first = np.zeros(offs.shape[0], bool)
    for j in range(grid.d):
        undecided = np.all(offs[:, :j] == 0, axis=1) if j else np.ones(offs.shape[0], bool)
        first |= undecided & (offs[:, j] > 0)
    offs = offs[first]
    return offs[(offs ** 2).sum(axis=1) <= radius ** 2]


def pair_difference_table(f: SampledField, radius: int = 64):
    """(distances, D) with D[q] = max_x |f(x + o_q) - f(x)| for all lattice
    offsets o_q of length at most ``radius`` nodes."""
    offs = _near_offsets(f.grid, radius)
    D = _sweeps.max_shift_difference(np.ascontiguousarray(f.values), offs.astype(np.int64))
    return f.grid.torus_distance(offs), D


def random_pair_differences(f: SampledField, n_pairs: int, seed: int):
    grid = f.grid
    rng = np.random.default_rng(seed)
    a = rng.integers(0, grid.N, size=(n_pairs, grid.d))
    b = rng.integers(0, grid.N, size=(n_pairs, grid.d))
    dist = grid.torus_distance(b - a)
    fa = f.values[tuple(a.T)]
    fb = f.values[tuple(b.T)]
    diff = np.sqrt((np.abs(fa - fb) ** 2).sum(axis=-1))
    keep = dist > 0
    return dist[keep], diff[keep]


def holder_seminorm(f: SampledField, eta: float, seed: int = 0, radius: int = 64,
                    n_random: int = 100_000) -> float:
    """sup |f(x) - f(y)| / d(x, y)^eta with the torus distance d.

    Every pair within ``radius`` nodes is visited, together with
    ``n_random`` seeded long-range pairs.
    """
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    dist, D = pair_difference_table(f, radius)
    best = float((D / dist ** eta).max()) if dist.size else 0.0
    if n_random:
        rd, rdiff = random_pair_differences(f, n_random, seed)
        if rd.size:
            best = max(best, float((rdiff / rd ** eta).max()))
    return best


def oscillation_tail(f: SampledField, r: float, eps: float = 1.0, p: float = 1.0) -> float:
    """Integral over lambda in [1, S/r] of osc_p(f; lambda r) lambda^(-1-eps).

    The restricted oscillation is a step function of the radius with jumps at
    the dyadic sides, so the integral is summed exactly piece by piece.  The
    range is truncated at lambda = S/r, the largest cube the torus carries.
    """
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    grid = f.grid
    if not 0 < r <= grid.S:
        raise ValueError(f"radius must lie in (0, S={grid.S}]")
    vals = np.maximum.accumulate(level_oscillations(f, p))
    sides = grid.h * 2.0 ** np.arange(vals.size)
    lam_max = grid.S / r
    # breakpoints in lambda where the step function may change
    cuts = np.concatenate(([1.0], sides[(sides > r) & (sides < grid.S)] / r, [lam_max]))
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        rho = a * r * (1 + 1e-12)
        below = np.nonzero(sides <= rho)[0]
        if below.size == 0:
            continue
        v = vals[below[-1]]
        total += v * (a ** -eps - b ** -eps) / eps
    return float(total)


# ---------------------------------------------------------------------------
# Carleson machinery


def _check_ladder(u: HalfSpaceField):
    if u.gradient is None:
        raise ValueError("Carleson norms need a half-space field with gradient channels")
    t = u.t_levels
    if t.size > 1 and np.max(t[1:] / t[:-1]) > MAX_LADDER_RATIO * (1 + 1e-12):
        raise ValueError(f"ladder ratio exceeds {MAX_LADDER_RATIO}")


def _window_sums(a: np.ndarray, w: int, d: int) -> np.ndarray:
    """Periodic sums over the w^d block with lower corner at each node."""
    out = a
    for ax in range(d):
        n = out.shape[ax]
        ext = np.concatenate([out, np.take(out, np.arange(w), axis=ax)], axis=ax)
        c = np.cumsum(ext, axis=ax)
        zero = np.zeros_like(np.take(c, [0], axis=ax))
        c = np.concatenate([zero, c], axis=ax)
        out = np.take(c, np.arange(w, w + n), axis=ax) - np.take(c, np.arange(n), axis=ax)
    return out


def _window_means(a: np.ndarray, w: int, d: int) -> np.ndarray:
    return _window_sums(a, w, d) / float(w ** d)


def box_integrals(u: HalfSpaceField, heights: Sequence[float],
                  channels: Optional[Sequence[int]] = None) -> np.ndarray:
    """I(x', T) = int_{t_min}^{T} |grad u(x', t)|^2 t dt for each T in ``heights``.

    Trapezoid rule in log t, using t dt = t^2 dlog t; a height between two
    ladder levels closes with a linearly interpolated partial panel.
    """
    _check_ladder(u)
    t = u.t_levels
    g = u.gradient_sq(channels) * (t ** 2).reshape((-1,) + (1,) * u.grid.d)
    logt = np.log(t)
    out = np.zeros((len(heights),) + u.grid.shape)
    cum = np.zeros(u.grid.shape)
    k = 0
    order = np.argsort(heights)
    for idx in order:
        T = float(heights[idx])
        if T < t[0] * (1 - 1e-12):
            out[idx] = 0.0
            continue
        while k + 1 < t.size and t[k + 1] <= T * (1 + 1e-12):
            cum = cum + 0.5 * (g[k] + g[k + 1]) * (logt[k + 1] - logt[k])
            k += 1
        res = cum
        if k + 1 < t.size and T > t[k] * (1 + 1e-12):
            lT = np.log(T)
            theta = (lT - logt[k]) / (logt[k + 1] - logt[k])
            gT = g[k] + theta * (g[k + 1] - g[k])
            res = cum + 0.5 * (g[k] + gT) * (lT - logt[k])
        out[idx] = res
    return out


@dataclass(frozen=True)
class CarlesonProfile:
    radii: np.ndarray
    values: np.ndarray
    level_values: np.ndarray = field(repr=False, default=None)

    @property
    def norm(self) -> float:
        return float(self.values[-1])

    def value_at(self, r: float) -> float:
        """Profile at radius r (largest dyadic side not exceeding r)."""
        i = np.nonzero(self.radii <= r * (1 + 1e-12))[0]
        return float(self.values[i[-1]]) if i.size else 0.0

    def to_rows(self):
        return [(float(r), float(v)) for r, v in zip(self.radii, self.values)]


def carleson_profile(u: HalfSpaceField, channels: Optional[Sequence[int]] = None) -> CarlesonProfile:
    """sup over cubes with side at most r of (|Q|^-1 int_box |grad u|^2 t)^(1/2),
    for r = h, 2h, ..., S."""
    grid = u.grid
    sides = grid.h * 2.0 ** np.arange(grid.max_level + 1)
    I = box_integrals(u, sides, channels)
    lev = np.array([np.sqrt(max(_window_means(I[l], 2 ** l, grid.d).max(), 0.0))
                    for l in range(sides.size)])
    return CarlesonProfile(sides, np.maximum.accumulate(lev), lev)


def carleson_norm(u: HalfSpaceField, channels: Optional[Sequence[int]] = None) -> float:
    return carleson_profile(u, channels).norm


def fractional_carleson(u: HalfSpaceField, eta: float, q: float = 2.0,
                        channels: Optional[Sequence[int]] = None) -> float:
    """sup_Q l(Q)^(-eta) (avg_Q (int_0^l(Q) |grad u|^2 t dt)^(q/2))^(1/q)."""
    if not 0 < eta < 1:
        raise ValueError("eta must lie in (0, 1)")
    if not q >= 1:
        raise ValueError("q must be at least 1")
    grid = u.grid
    sides = grid.h * 2.0 ** np.arange(grid.max_level + 1)
    I = box_integrals(u, sides, channels)
    best = 0.0
    for l, s in enumerate(sides):
        m = _window_means(np.maximum(I[l], 0.0) ** (q / 2), 2 ** l, grid.d).max()
        best = max(best, s ** (-eta) * max(m, 0.0) ** (1 / q))
    return float(best)


@dataclass(frozen=True)
class VanishingResult:
    verdict: str
    ratio: float
    r_min: float
    r_max: float
    profile: CarlesonProfile
    thresholds: tuple


def vanishing_carleson_test(u: HalfSpaceField, threshold: float = 0.1, persist: float = 0.5,
                            r_min: Optional[float] = None,
                            channels: Optional[Sequence[int]] = None) -> VanishingResult:
    """Compare the local Carleson profile at r_min (default 2h) with its value at S."""
    prof = carleson_profile(u, channels)
    r_min = 2 * u.grid.h if r_min is None else r_min
    small, large = prof.value_at(r_min), prof.norm
    ratio = small / large if large > 0 else 0.0
    verdict = decay_verdict(small, large, threshold, persist)
    return VanishingResult(verdict, float(ratio), float(r_min), float(prof.radii[-1]), prof,
                           (threshold, persist))
