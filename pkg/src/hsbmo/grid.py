"""Periodic boundary grids, sampled fields, cube families and test data.

The boundary R^{n-1} is replaced by a torus of side 2S sampled on an
N^d lattice with spacing h.  Node k sits at x_k = (k - N/2) h on every
axis, so the origin is a node.  Fields carry M complex components in the
last array axis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Optional, Sequence

import numpy as np

__all__ = [
    "BoundaryGrid",
    "SampledField",
    "Cube",
    "DyadicCubeFamily",
    "HalfSpaceField",
    "GENERATORS",
    "make_grid",
    "geometric_ladder",
    "generate",
    "cube_statistics",
    "translate",
    "dilate",
]


def _is_power_of_two(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


def _frozen(a: np.ndarray) -> np.ndarray:
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class BoundaryGrid:
    """Uniform periodic grid on [-S, S)^d with S = N h / 2."""

    d: int
    N: int
    h: float

    def __post_init__(self):
        if self.d not in (1, 2):
            raise ValueError(f"boundary dimension d must be 1 or 2, got {self.d}")
        if not isinstance(self.N, (int, np.integer)) or not _is_power_of_two(int(self.N)):
            raise ValueError(f"N must be a power of two, got {self.N}")
        if self.N < 8:
            raise ValueError(f"N must be at least 8, got {self.N}")
        if not self.h > 0:
            raise ValueError(f"grid spacing h must be positive, got {self.h}")
        object.__setattr__(self, "N", int(self.N))
        object.__setattr__(self, "h", float(self.h))

    @property
    def n(self) -> int:
        return self.d + 1

    @property
    def S(self) -> float:
        return self.N * self.h / 2

    @property
    def shape(self) -> tuple:
        return (self.N,) * self.d

    @property
    def size(self) -> int:
        return self.N ** self.d

    @property
    def cell_volume(self) -> float:
        return self.h ** self.d

    @property
    def max_level(self) -> int:
        """Largest cube level: side 2^level * h equals S."""
        return int(np.log2(self.N // 2))

    def axis(self) -> np.ndarray:
        return (np.arange(self.N) - self.N // 2) * self.h

    def mesh(self) -> np.ndarray:
        """Node coordinates, shape (*shape, d)."""
        axes = [self.axis()] * self.d
        return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)

    def radius(self) -> np.ndarray:
        return np.sqrt((self.mesh() ** 2).sum(axis=-1))

    def frequencies(self) -> np.ndarray:
        """Angular frequencies xi = pi m / S in FFT order, shape (*shape, d)."""
        k = 2 * np.pi * np.fft.fftfreq(self.N, d=self.h)
        return np.stack(np.meshgrid(*([k] * self.d), indexing="ij"), axis=-1)

    def nyquist_mask(self) -> np.ndarray:
        """Boolean (*shape, d): True where axis j sits on the Nyquist index."""
        m = np.zeros(self.N, dtype=bool)
        m[self.N // 2] = True
        return np.stack(np.meshgrid(*([m] * self.d), indexing="ij"), axis=-1)

    def index_of(self, x: Sequence[float]) -> tuple:
        """Lattice index of the node at coordinates x (must lie on the grid)."""
        k = np.rint(np.asarray(x, float) / self.h).astype(int) + self.N // 2
        return tuple(int(v) % self.N for v in np.atleast_1d(k))

    def torus_distance(self, dk: np.ndarray) -> np.ndarray:
        """Length of lattice offsets dk (integer array, last axis d) on the torus."""
        dk = np.asarray(dk)
        w = np.abs(((dk + self.N // 2) % self.N) - self.N // 2)
        return self.h * np.sqrt((w.astype(float) ** 2).sum(axis=-1))

    def to_dict(self) -> dict:
        return {"d": self.d, "N": self.N, "h": self.h}


def make_grid(d: int, N: int, h: float) -> BoundaryGrid:
    return BoundaryGrid(d=int(d), N=N, h=float(h))


@dataclass(frozen=True, eq=False)
class SampledField:
    """C^M-valued samples on a boundary grid; ``values`` has shape (*grid.shape, M)."""

    grid: BoundaryGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.complex128)
        if v.shape == self.grid.shape:
            v = v[..., None]
        if v.ndim != self.grid.d + 1 or v.shape[:-1] != self.grid.shape:
            raise ValueError(
                f"field values of shape {v.shape} do not match grid shape {self.grid.shape}"
            )
        if not np.all(np.isfinite(v)):
            raise ValueError("field contains NaN or Inf entries")
        object.__setattr__(self, "values", _frozen(v))

    @property
    def M(self) -> int:
        return self.values.shape[-1]

    def mean(self) -> np.ndarray:
        return self.values.reshape(-1, self.M).mean(axis=0)

    def component(self, j: int) -> np.ndarray:
        return self.values[..., j]

    def __sub__(self, other: "SampledField") -> "SampledField":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return SampledField(self.grid, self.values - other.values)

    def __add__(self, other: "SampledField") -> "SampledField":
        if other.grid != self.grid:
            raise ValueError("fields live on different grids")
        return SampledField(self.grid, self.values + other.values)

    def scaled(self, c: complex) -> "SampledField":
        return SampledField(self.grid, c * self.values)


class Cube(NamedTuple):
    """Axis-parallel lattice cube of side 2^level * h with lower corner ``corner``."""

    level: int
    corner: tuple

    def side_nodes(self) -> int:
        return 1 << self.level

    def side(self, grid: BoundaryGrid) -> float:
        return self.side_nodes() * grid.h

    def index(self, grid: BoundaryGrid) -> tuple:
        """Open-mesh index arrays selecting the cube's nodes (with periodic wrap)."""
        w = self.side_nodes()
        idx = [(c + np.arange(w)) % grid.N for c in self.corner]
        return np.ix_(*idx)

    def contains(self, grid: BoundaryGrid, k: Sequence[int]) -> bool:
        w = self.side_nodes()
        return all(((ki - c) % grid.N) < w for ki, c in zip(k, self.corner))


@dataclass(frozen=True)
class DyadicCubeFamily:
    """Cubes with dyadic side lengths 2^l h, 0 <= l <= log2(N/2).

    With ``sliding=True`` (the default used for all suprema) every lattice
    node is an admissible corner, so the family is invariant under lattice
    translations.  With ``sliding=False`` corners are restricted to multiples
    of 2^l and each level tiles the torus exactly.
    """

    grid: BoundaryGrid
    levels: tuple = ()
    sliding: bool = True

    def __post_init__(self):
        levels = tuple(self.levels) or tuple(range(self.grid.max_level + 1))
        for lev in levels:
            if lev < 0 or lev > self.grid.max_level:
                raise ValueError(
                    f"cube level {lev} has side larger than S or is negative "
                    f"(max level {self.grid.max_level})"
                )
        object.__setattr__(self, "levels", tuple(sorted(set(levels))))

    def sides(self) -> np.ndarray:
        return np.array([(1 << lev) * self.grid.h for lev in self.levels])

    def stride(self, level: int) -> int:
        return 1 if self.sliding else (1 << level)

    def count(self, level: int) -> int:
        return (self.grid.N // self.stride(level)) ** self.grid.d

    def cubes(self, level: int) -> Iterator[Cube]:
        s = self.stride(level)
        starts = range(0, self.grid.N, s)
        for corner in np.ndindex(*([len(starts)] * self.grid.d)):
            yield Cube(level, tuple(c * s for c in corner))

    def __iter__(self) -> Iterator[Cube]:
        for lev in self.levels:
            yield from self.cubes(lev)


def geometric_ladder(t_min: float, ratio: float, t_max: float) -> np.ndarray:
    """t_k = t_min * ratio^k for all k with t_k <= t_max (within rounding)."""
    if not t_min > 0:
        raise ValueError("t_min must be positive")
    if not 1 < ratio <= 2:
        raise ValueError(f"ladder ratio must lie in (1, 2], got {ratio}")
    K = int(np.floor(np.log(t_max / t_min) / np.log(ratio) + 1e-9)) + 1
    return t_min * ratio ** np.arange(max(K, 1))


@dataclass(frozen=True, eq=False)
class HalfSpaceField:
    """Samples of u (and optionally grad u) on grid x geometric height ladder.

    ``values`` has shape (K, *grid.shape, M); ``gradient`` has shape
    (d+1, K, *grid.shape, M) with channels d_1..d_d, d_t.
    """

    grid: BoundaryGrid
    t_levels: np.ndarray
    values: np.ndarray
    gradient: Optional[np.ndarray] = None
    source: Optional[tuple] = field(default=None, repr=False)

    def __post_init__(self):
        t = np.asarray(self.t_levels, dtype=float)
        if t.ndim != 1 or t.size == 0:
            raise ValueError("t_levels must be a non-empty 1-D array")
        if t[0] <= 0 or np.any(np.diff(t) <= 0):
            raise ValueError("t_levels must be positive and strictly increasing")
        if t.size > 1:
            r = t[1:] / t[:-1]
            if np.any(r > 2 + 1e-12):
                raise ValueError("ladder ratio must not exceed 2")
        object.__setattr__(self, "t_levels", _frozen(t))
        v = np.asarray(self.values)
        if v.shape[:-1] != (t.size,) + self.grid.shape:
            raise ValueError(f"values shape {v.shape} does not match ladder x grid")
        object.__setattr__(self, "values", _frozen(v))
        if self.gradient is not None:
            g = np.asarray(self.gradient)
            if g.shape != (self.grid.d + 1,) + v.shape:
                raise ValueError(f"gradient shape {g.shape} must be (d+1,) + {v.shape}")
            object.__setattr__(self, "gradient", _frozen(g))

    @property
    def M(self) -> int:
        return self.values.shape[-1]

    @property
    def K(self) -> int:
        return self.t_levels.size

    def level(self, k: int) -> SampledField:
        return SampledField(self.grid, self.values[k])

    def gradient_sq(self, channels: Optional[Sequence[int]] = None) -> np.ndarray:
        """Sum of |d_j u|^2 over components and the chosen channels, shape (K, *shape)."""
        if self.gradient is None:
            raise ValueError("half-space field carries no gradient channels")
        g = self.gradient if channels is None else self.gradient[list(channels)]
        return (np.abs(g) ** 2).sum(axis=(0, -1))


# ---------------------------------------------------------------------------
# generators


def _bump_profile(r: np.ndarray) -> np.ndarray:
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out


def _gen_constant(grid, params, rng):
    return np.full(grid.shape, complex(params.get("c", 1.0)))


def _gen_power_eta(grid, params, rng):
    eta = float(params.get("eta", 0.5))
    if not 0 < eta < 1:
        raise ValueError(f"power_eta needs eta in (0, 1), got {eta}")
    return grid.radius() ** eta


def _gen_log_abs(grid, params, rng):
    r = grid.radius()
    r[r == 0] = grid.h / 2
    return np.log(r)


def _gen_bump(grid, params, rng):
    radius = float(params.get("radius", grid.S / 2))
    center = np.asarray(params.get("center", [0.0] * grid.d), float)
    if radius <= 0 or radius + np.abs(center).max() > grid.S / 2 + 1e-12:
        raise ValueError("bump support must lie inside [-S/2, S/2]^d")
    r = np.sqrt(((grid.mesh() - center) ** 2).sum(axis=-1)) / radius
    return _bump_profile(r)


def _gen_lacunary(grid, params, rng):
    # sum_k k^{-1} cos(2^k w0 x_j + phase): l^2 but not l^1 coefficients
    w0 = np.pi / grid.S
    max_terms = int(np.log2(grid.N // 2)) - 2
    terms = int(params.get("terms", max_terms))
    if not 1 <= terms <= max_terms:
        raise ValueError(f"lacunary terms must lie in [1, {max_terms}]")
    x = grid.mesh()
    out = np.zeros(grid.shape)
    for j in range(grid.d):
        phases = rng.uniform(0, 2 * np.pi, size=terms)
        for k in range(1, terms + 1):
            out += np.cos((2 ** k) * w0 * x[..., j] + phases[k - 1]) / k
    return out


def _gen_indicator(grid, params, rng):
    half = params.get("half_side")
    x = grid.mesh()
    if half is None:
        return (x[..., 0] < 0).astype(float)
    half = float(half)
    if not 0 < half <= grid.S / 2:
        raise ValueError("indicator half_side must lie in (0, S/2]")
    return np.all(np.abs(x) < half, axis=-1).astype(float)


GENERATORS = {
    "constant": _gen_constant,
    "power_eta": _gen_power_eta,
    "log_abs": _gen_log_abs,
    "bump": _gen_bump,
    "lacunary_bmo": _gen_lacunary,
    "indicator": _gen_indicator,
}


def generate(name: str, params: Optional[dict] = None, grid: BoundaryGrid = None,
             seed: int = 0) -> SampledField:
    """Deterministic test field ``name`` on ``grid``.

    ``params`` may carry ``M`` (component count, default 1) and
    ``direction`` (a C^M vector the scalar profile is multiplied by; default
    (1, ..., 1)/sqrt(M)).  Remaining keys are generator specific.
    """
    if name not in GENERATORS:
        raise ValueError(f"unknown generator {name!r}; expected one of {sorted(GENERATORS)}")
    if grid is None:
        raise ValueError("a grid is required")
    params = dict(params or {})
    M = int(params.pop("M", 1))
    direction = params.pop("direction", None)
    rng = np.random.default_rng(seed)
    scalar = np.asarray(GENERATORS[name](grid, params, rng), dtype=np.complex128)
    if direction is None:
        direction = np.ones(M) / np.sqrt(M)
    direction = np.asarray(direction, dtype=np.complex128)
    if direction.shape != (M,):
        raise ValueError(f"direction must have length M={M}")
    return SampledField(grid, scalar[..., None] * direction)


# ---------------------------------------------------------------------------
# elementary operations


def cube_statistics(f: SampledField, Q: Cube, p: float = 1.0):
    """Mean of f over the nodes of Q and the L^p mean oscillation about it."""
    if p < 1:
        raise ValueError("p must be >= 1")
    if Q.level < 0 or Q.level > f.grid.max_level:
        raise ValueError("cube is not in the grid's dyadic family")
    block = f.values[Q.index(f.grid)].reshape(-1, f.M)
    if block.shape[0] == 0:
        raise RuntimeError("empty cube")
    mean = block.mean(axis=0)
    dev = np.sqrt((np.abs(block - mean) ** 2).sum(axis=1))
    return mean, float(np.mean(dev ** p) ** (1.0 / p))


def translate(f: SampledField, z: Sequence[int]) -> SampledField:
    """(tau_z f)(x) = f(x + z h) for an integer lattice offset z."""
    z = np.atleast_1d(np.asarray(z))
    if z.shape != (f.grid.d,) or not np.all(np.equal(np.mod(z, 1), 0)):
        raise ValueError("translation must be an integer lattice vector of length d")
    v = np.roll(f.values, shift=tuple(int(-s) for s in z), axis=tuple(range(f.grid.d)))
    return SampledField(f.grid, v)


def dilate(f: SampledField, lam: int) -> SampledField:
    """(delta_lam f)(x) = f(lam x) by index striding with periodic wrap."""
    lam_i = int(lam)
    if lam_i != lam or not _is_power_of_two(lam_i):
        raise ValueError(f"dilation factor must be a power of two >= 1, got {lam}")
    if f.grid.N // lam_i < 8:
        raise ValueError("dilation leaves fewer than 8 nodes per axis")
    N = f.grid.N
    idx = (N // 2 + lam_i * (np.arange(N) - N // 2)) % N
    v = f.values[np.ix_(*([idx] * f.grid.d))]
    return SampledField(f.grid, v)
