"""Tent-space operators, the Theta square function, atoms and molecules,
and the Calderon reproducing identity on the Fourier side."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
from scipy import ndimage

from .exceptions import NumericalFault
from .grid import BoundaryGrid, HalfSpaceField, SampledField
from .kernels import PoissonPropagator, kernel_gradient_array

__all__ = [
    "ConeStencil",
    "cone_stencil",
    "log_trapezoid_weights",
    "area_function",
    "carleson_operator",
    "tent_duality_ratio",
    "TentDuality",
    "Atom",
    "make_atom",
    "theta_field",
    "theta_fields",
    "atom_square_norm",
    "theta_square_function",
    "theta_cancellation",
    "l1_norm",
    "molecule_check",
    "calderon_identity_check",
    "calderon_convergence",
]


def log_trapezoid_weights(t_levels: Sequence[float]) -> np.ndarray:
    """Trapezoid weights in log t on the ladder: sum_k w_k g(t_k) ~ int g dt/t."""
    lt = np.log(np.asarray(t_levels, float))
    w = np.zeros(lt.size)
    if lt.size > 1:
        dl = np.diff(lt)
        w[:-1] += dl / 2
        w[1:] += dl / 2
    return w


def _cumulative_weights(t_levels: np.ndarray, T: float) -> np.ndarray:
    """Weights realizing int_{t_0}^{T} g dt/t by trapezoid in log t, with a
    linearly interpolated partial panel when T falls between two levels."""
    lt = np.log(t_levels)
    w = np.zeros(lt.size)
    if T < t_levels[0] * (1 - 1e-12):
        return w
    j = int(np.searchsorted(t_levels, T * (1 + 1e-12), side="right")) - 1
    if j > 0:
        w[: j + 1] = log_trapezoid_weights(t_levels[: j + 1])
    if j + 1 < lt.size and T > t_levels[j] * (1 + 1e-12):
        L = np.log(T) - lt[j]
        theta = L / (lt[j + 1] - lt[j])
        w[j] += 0.5 * L * (2 - theta)
        w[j + 1] += 0.5 * L * theta
    return w


# ---------------------------------------------------------------------------
# cones


@dataclass(frozen=True)
class ConeStencil:
    """Lattice offsets y' with |y'| < kappa t_k for every ladder level."""

    kappa: float
    t_levels: tuple
    offsets: tuple

    def level(self, k: int) -> np.ndarray:
        return self.offsets[k]

    def indicator(self, grid: BoundaryGrid, k: int) -> np.ndarray:
        """Periodic indicator of the level-k stencil in FFT (wrapped) order."""
        ind = np.zeros(grid.shape)
        off = self.offsets[k] % grid.N
        ind[tuple(off.T)] = 1.0
        return ind


@lru_cache(maxsize=32)
def cone_stencil(grid: BoundaryGrid, kappa: float, t_levels: tuple) -> ConeStencil:
    if not kappa > 0:
        raise ValueError("cone aperture must be positive")
    offs = []
    for t in t_levels:
        r = kappa * t / grid.h
        m = min(int(np.ceil(r)), grid.N // 2)
        rng = np.arange(-m, m + 1)
        o = np.stack(np.meshgrid(*([rng] * grid.d), indexing="ij"), axis=-1).reshape(-1, grid.d)
        o = o[(o ** 2).sum(axis=1) < r * r]
        if o.shape[0] == 0:
            raise ValueError(f"empty cone stencil at t={t}")
        o.setflags(write=False)
        offs.append(o)
    return ConeStencil(float(kappa), tuple(float(t) for t in t_levels), tuple(offs))


def _level_density(F: np.ndarray, grid: BoundaryGrid) -> np.ndarray:
    a = np.abs(np.asarray(F)) ** 2
    if a.ndim == grid.d + 2:
        a = a.sum(axis=-1)
    if a.ndim != grid.d + 1 or a.shape[1:] != grid.shape:
        raise ValueError(f"half-space array of shape {np.shape(F)} does not match the grid")
    return a


def _as_levels(F, t_levels):
    if isinstance(F, HalfSpaceField):
        return F.values, F.t_levels, F.grid
    if t_levels is None:
        raise ValueError("t_levels are required for raw arrays")
    return F, np.asarray(t_levels, float), None


def area_function(F, t_levels: Optional[Sequence[float]] = None, grid: Optional[BoundaryGrid] = None,
                  kappa: float = 1.0) -> SampledField:
    """Lusin area function (int_cone |F(y', t)|^2 dy' dt / t^n)^(1/2).

    Discretized as a sum over the cone stencil with weights
    h^d * dlog(t) * t^(1-n); the stencil sum per level is a periodic FFT
    convolution with the disk indicator.
    """
    F, t, g = _as_levels(F, t_levels)
    grid = grid or g
    dens = _level_density(F, grid)
    st = cone_stencil(grid, float(kappa), tuple(t))
    w = log_trapezoid_weights(t) * t ** (1 - grid.n) * grid.cell_volume
    axes = tuple(range(grid.d))
    acc = np.zeros(grid.shape)
    for k in range(t.size):
        if w[k] == 0:
            continue
        ind = st.indicator(grid, k)
        if st.level(k).shape[0] == 1:
            acc += w[k] * dens[k]
            continue
        # sum over y in the cone of dens(x + y): correlation with the stencil
        conv = np.fft.ifftn(np.fft.fftn(dens[k], axes=axes) * np.conj(np.fft.fftn(ind, axes=axes)),
                            axes=axes).real
        acc += w[k] * np.maximum(conv, 0.0)
    return SampledField(grid, np.sqrt(acc))


def _box_means_fft(a: np.ndarray, w: int, grid: BoundaryGrid) -> np.ndarray:
    """Mean of a over the w^d block with lower corner at each node (FFT route)."""
    box = np.zeros(grid.shape)
    box[tuple(slice(0, w) for _ in range(grid.d))] = 1.0
    axes = tuple(range(grid.d))
    out = np.fft.ifftn(np.fft.fftn(a, axes=axes) * np.conj(np.fft.fftn(box, axes=axes)), axes=axes).real
    return out / w ** grid.d


def carleson_operator(F, t_levels: Optional[Sequence[float]] = None,
                      grid: Optional[BoundaryGrid] = None) -> SampledField:
    """C F(x') = max over cubes Q containing x' of (int_0^l(Q) avg_Q |F|^2 dt/t)^(1/2).

    Cubes run over the sliding dyadic-side family; the t integral starts at
    the bottom of the ladder.
    """
    F, t, g = _as_levels(F, t_levels)
    grid = grid or g
    dens = _level_density(F, grid)
    best = np.zeros(grid.shape)
    for l in range(grid.max_level + 1):
        w = 2 ** l
        wts = _cumulative_weights(t, w * grid.h)
        J = np.tensordot(wts, dens, axes=(0, 0))
        W = np.maximum(_box_means_fft(J, w, grid), 0.0)
        # x is covered by the corners x - s, s = 0..w-1 along each axis
        cover = ndimage.maximum_filter(W, size=w, mode="wrap", origin=(w - 1) // 2 if w > 1 else 0)
        best = np.maximum(best, cover)
    return SampledField(grid, np.sqrt(best))


@dataclass(frozen=True)
class TentDuality:
    ratio: float
    lhs: float
    rhs: float
    degenerate: bool


def tent_duality_ratio(F, G, t_levels: Optional[Sequence[float]] = None,
                       grid: Optional[BoundaryGrid] = None, kappa: float = 1.0) -> TentDuality:
    """(int |F G| dx' dt/t) / (int C F * A G dx')."""
    Fa, t, g1 = _as_levels(F, t_levels)
    Ga, t2, g2 = _as_levels(G, t_levels)
    grid = grid or g1 or g2
    if t.shape != t2.shape or not np.allclose(t, t2, rtol=0, atol=0):
        raise ValueError("F and G must share the ladder")
    fF = np.sqrt(_level_density(Fa, grid))
    fG = np.sqrt(_level_density(Ga, grid))
    wts = log_trapezoid_weights(t)
    lhs = float(np.tensordot(wts, (fF * fG).reshape(t.size, -1).sum(axis=1), axes=1) * grid.cell_volume)
    cf = carleson_operator(Fa, t, grid).values[..., 0].real
    ag = area_function(Ga, t, grid, kappa).values[..., 0].real
    rhs = float((cf * ag).sum() * grid.cell_volume)
    if rhs == 0:
        if lhs == 0:
            return TentDuality(0.0, 0.0, 0.0, True)
        raise NumericalFault("tent duality: zero right side with nonzero left side")
    return TentDuality(lhs / rhs, lhs, rhs, False)


# ---------------------------------------------------------------------------
# atoms


@dataclass(frozen=True, eq=False)
class Atom:
    """Mean-zero block supported on the dyadic-side cube with lower corner
    ``corner`` and side ``side_nodes`` nodes, bounded by |Q|^-1."""

    grid: BoundaryGrid
    corner: tuple
    side_nodes: int
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.complex128)
        if v.shape[: self.grid.d] != (self.side_nodes,) * self.grid.d:
            raise ValueError("atom block does not match its cube")
        if v.ndim == self.grid.d:
            v = v[..., None]
        vol = (self.side_nodes * self.grid.h) ** self.grid.d
        if np.sqrt((np.abs(v) ** 2).sum(axis=-1)).max() > (1 + 1e-12) / vol:
            raise ValueError("atom exceeds the |Q|^-1 bound")
        mean = v.reshape(-1, v.shape[-1]).mean(axis=0)
        if np.abs(mean).max() > 1e-12 / vol:
            raise ValueError("atom does not have mean zero")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def volume(self) -> float:
        return (self.side_nodes * self.grid.h) ** self.grid.d

    def field(self) -> SampledField:
        out = np.zeros(self.grid.shape + (self.values.shape[-1],), complex)
        idx = np.ix_(*[(np.arange(self.side_nodes) + c) % self.grid.N for c in self.corner])
        out[idx] = self.values
        return SampledField(self.grid, out)


def make_atom(grid: BoundaryGrid, seed: int, level: Optional[int] = None, M: int = 1) -> Atom:
    """Seeded random atom: Gaussian block, mean removed, scaled to the bound."""
    rng = np.random.default_rng(seed)
    if level is None:
        level = int(rng.integers(1, max(2, grid.max_level - 1)))
    if not 1 <= level <= grid.max_level:
        raise ValueError("atom level must lie in 1..max_level")
    w = 2 ** level
    corner = tuple(int(c) for c in rng.integers(0, grid.N, size=grid.d))
    v = rng.standard_normal((w,) * grid.d + (M,)) + 0j
    v -= v.reshape(-1, M).mean(axis=0)
    mag = np.sqrt((np.abs(v) ** 2).sum(axis=-1)).max()
    vol = (w * grid.h) ** grid.d
    v *= (1.0 / vol) / mag
    return Atom(grid, corner, w, v)


# ---------------------------------------------------------------------------
# Theta family


def _check_direction(grid: BoundaryGrid, j: int):
    if not 1 <= j <= grid.n:
        raise ValueError(f"direction index must lie in 1..{grid.n}")


def theta_fields(f: SampledField, prop: PoissonPropagator, directions: Sequence[int],
                 t_levels: Sequence[float]) -> dict:
    """t d_j u(x', t) on the ladder for each j in ``directions`` (j = n is the
    t direction), one propagator application per level; arrays (K, *shape, M)."""
    grid = f.grid
    for j in directions:
        _check_direction(grid, j)
    if f.grid != prop.grid or f.M != prop.M:
        raise ValueError("field and propagator do not match")
    axes = tuple(range(grid.d))
    F = np.fft.fftn(f.values, axes=axes)[..., None]
    t = np.asarray(t_levels, float)
    xi = np.where(grid.nyquist_mask(), 0.0, grid.frequencies())
    out = {j: np.empty((t.size,) + f.values.shape, complex) for j in directions}
    for k, tk in enumerate(t):
        U = (prop.propagator(tk) @ F)[..., 0]
        for j in directions:
            if j <= grid.d:
                V = (1j * xi[..., j - 1])[..., None] * U
            else:
                V = (prop.solvents @ U[..., None])[..., 0]
            out[j][k] = tk * np.fft.ifftn(V, axes=axes)
    return out


def theta_field(f: SampledField, prop: PoissonPropagator, j: int,
                t_levels: Sequence[float]) -> np.ndarray:
    """t d_j u(x', t) on the ladder, shape (K, *shape, M)."""
    return theta_fields(f, prop, (j,), t_levels)[j]


def theta_square_function(f: SampledField, prop: PoissonPropagator, j: int,
                          t_levels: Sequence[float], kappa: float = 1.0) -> SampledField:
    """S_Theta f: the area function of t d_j u."""
    return area_function(theta_field(f, prop, j, t_levels), t_levels, f.grid, kappa)


def atom_square_norm(atom: "Atom", prop: PoissonPropagator, t_levels: Sequence[float],
                     kappa: float = 1.0) -> float:
    """max over directions j of ||S_Theta a||_L1 for Theta = t d_j K."""
    dirs = tuple(range(1, prop.grid.n + 1))
    th = theta_fields(atom.field(), prop, dirs, t_levels)
    return max(l1_norm(area_function(th[j], t_levels, prop.grid, kappa)) for j in dirs)


def l1_norm(f: SampledField) -> float:
    return float(np.sqrt((np.abs(f.values) ** 2).sum(axis=-1)).sum() * f.grid.cell_volume)


def theta_cancellation(prop: PoissonPropagator, t: float) -> float:
    """max over directions and entries of |h^d sum_x t d_j K(x, t)|."""
    G = kernel_gradient_array(prop, t)
    sums = G.reshape(G.shape[0], -1, prop.M, prop.M).sum(axis=1) * prop.grid.cell_volume
    return float(t * np.abs(sums).max())


# ---------------------------------------------------------------------------
# molecules


def molecule_check(prop: PoissonPropagator, t: float, min_annuli: int = 4,
                   fit_from: int = 3) -> dict:
    """Annulus L^2 norms of t grad K(., t) around the origin.

    Annulus k is 2^k B_t minus 2^(k-1) B_t, B_t the ball of radius t; only
    annuli inside radius S/2 are used so the periodic images stay away.  The
    slope of log2(norm_k) against k is fitted from annulus ``fit_from`` on:
    d_t K changes sign near |x'| = t, which depresses the first two annuli.
    The target exponent is -(d/2 + 1).
    """
    grid = prop.grid
    if not 0 < t <= grid.S / 8 + 1e-12:
        raise ValueError("molecule check needs 0 < t <= S/8")
    kmax = int(np.floor(np.log2(grid.S / 2 / t) + 1e-12))
    if kmax < min_annuli:
        raise ValueError(f"box too small: only {kmax} annuli fit inside S/2 at t={t}")
    G = t * kernel_gradient_array(prop, t)
    dens = (np.abs(G) ** 2).sum(axis=(0, -2, -1))
    r = grid.radius()
    norms = [float(np.sqrt(dens[r < t].sum() * grid.cell_volume))]
    for k in range(1, kmax + 1):
        ring = (r < 2 ** k * t) & (r >= 2 ** (k - 1) * t)
        norms.append(float(np.sqrt(dens[ring].sum() * grid.cell_volume)))
    norms = np.array(norms)
    ks = np.arange(norms.size)
    sel = ks >= fit_from
    slope = float(np.polyfit(ks[sel], np.log2(norms[sel]), 1)[0])
    expected = -(grid.d / 2 + 1)
    # constant C in norm_k <= C |2^k B_t|^{-1/2} 2^{-k}
    from math import gamma, pi
    unit_ball = pi ** (grid.d / 2) / gamma(grid.d / 2 + 1)
    vol = unit_ball * (2.0 ** ks * t) ** grid.d
    constant = float((norms * np.sqrt(vol) * 2.0 ** ks).max())
    means = G.reshape(G.shape[0], -1, prop.M, prop.M).sum(axis=1) * grid.cell_volume
    return {
        "t": float(t),
        "annulus_norms": norms.tolist(),
        "slope": slope,
        "expected_slope": expected,
        "constant": constant,
        "mean_abs": float(np.abs(means).max()),
    }


# ---------------------------------------------------------------------------
# Calderon reproducing identity


def _calderon_sides(prop: PoissonPropagator, a: float, b: float, nodes: int):
    Lam = prop.solvents
    x, wq = np.polynomial.legendre.leggauss(nodes)
    la, lb = np.log(a), np.log(b)
    sig = 0.5 * (lb - la) * x + 0.5 * (lb + la)
    wq = 0.5 * (lb - la) * wq
    lhs = np.zeros_like(Lam)
    for s, wk in zip(sig, wq):
        t = float(np.exp(s))
        phi = t * (Lam @ prop.propagator(t))
        lhs += (4.0 * wk) * (phi @ phi)
    return lhs


def _calderon_rhs(prop: PoissonPropagator, a: float, b: float):
    Lam = prop.solvents
    E2a, E2b = prop.propagator(2 * a), prop.propagator(2 * b)
    da = 2 * a * (Lam @ E2a) - E2a
    db = 2 * b * (Lam @ E2b) - E2b
    return db - da, np.maximum(np.linalg.norm(da, axis=(-2, -1)), np.linalg.norm(db, axis=(-2, -1)))


def calderon_identity_check(prop: PoissonPropagator, a: float, b: float, nodes: int = 64) -> float:
    """max over frequencies of |Psi_ab - (Phi_2b - P_2b - Phi_2a + P_2a)| / scale.

    Psi_ab's symbol 4 int_a^b (t Lam e^{t Lam})^2 dt/t is integrated by
    Gauss-Legendre in log t; scale is the larger of |Phi_2a - P_2a| and
    |Phi_2b - P_2b| at each frequency.
    """
    if not 0 < a <= b <= prop.grid.S / 8 + 1e-12:
        raise ValueError("need 0 < a <= b <= S/8")
    if a == b:
        return 0.0
    rhs, scale = _calderon_rhs(prop, a, b)
    lhs = _calderon_sides(prop, a, b, nodes)
    err = np.linalg.norm(lhs - rhs, axis=(-2, -1)) / np.maximum(scale, 1e-300)
    return float(err.max())


def calderon_convergence(prop: PoissonPropagator, a: float, b: float,
                         nodes: Sequence[int] = (8, 16, 32, 64, 128), floor: float = 1e-10) -> dict:
    """Errors under node doubling; ``converged`` requires every step to at least
    halve the error until it reaches ``floor`` and to stay there afterwards."""
    errs = [calderon_identity_check(prop, a, b, n) for n in nodes]
    ok = True
    for e0, e1 in zip(errs[:-1], errs[1:]):
        if e0 > floor:
            ok &= e1 <= e0 / 2 or e1 <= floor
        else:
            ok &= e1 <= floor
    return {"nodes": list(nodes), "errors": errs, "converged": bool(ok)}
