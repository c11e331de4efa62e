"""Poisson kernels of constant-coefficient elliptic systems on the torus.

For a system  (Lu)_a = d_r (A^{ab}_{rs} d_s u_b)  in the upper half-space,
Fourier transform in x' turns Lu = 0 into

    B2 u'' + i B1(xi) u' - B0(xi) u = 0,

and the bounded solution is u(xi, t) = exp(t Lam(xi)) f(xi) where Lam is
the solvent of  B2 Lam^2 + i B1 Lam - B0 = 0  with spectrum in Re < 0.
Lam is obtained from the stable invariant subspace of the companion
matrix; exp(t Lam) is evaluated by scaling and squaring.
"""

from __future__ import annotations

from collections import OrderedDict
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .exceptions import EllipticityError, NumericalFault
from .grid import BoundaryGrid, SampledField, make_grid

__all__ = [
    "EllipticSystem",
    "PoissonPropagator",
    "SYSTEMS",
    "named_system",
    "system_from_coefficients",
    "solvent",
    "expm_stack",
    "solvents",
    "build_propagator",
    "propagator_from_solvents",
    "kernel_array",
    "kernel_field",
    "kernel_gradient_array",
    "harmonic_kernel_exact",
    "semigroup_error",
    "normalization_error",
    "homogeneity_error",
    "decay_constants",
    "fd_pde_residual",
]

N_ELLIPTIC_SAMPLES = 10_000
RESIDUAL_TOL = 1e-10
EIG_COND_FALLBACK = 1e6
SCHUR_COND_ABORT = 1e12


def _unit_directions(n: int, count: int) -> np.ndarray:
    """Quasi-uniform points on S^{n-1} (n = 2 or 3)."""
    if n == 2:
        th = np.pi * (np.arange(count) + 0.5) / count
        return np.stack([np.cos(th), np.sin(th)], axis=1)
    if n == 3:
        # Fibonacci lattice on the sphere
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        phi = np.pi * (1 + 5 ** 0.5) * i
        r = np.sqrt(1 - z ** 2)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    raise ValueError(f"ambient dimension n must be 2 or 3, got {n}")


def _symbol(coeff: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """sum_rs A^{ab}_{rs} xi_r xi_s for a stack of real xi, shape (F, M, M)."""
    return np.einsum("abrs,fr,fs->fab", coeff, xi, xi)


@dataclass(frozen=True, eq=False)
class EllipticSystem:
    """Coefficient tensor coeff[a, b, r, s] with a certified ellipticity margin."""

    coeff: np.ndarray
    name: str = "custom"
    params: dict = field(default_factory=dict)
    kappa_o: float = field(init=False)

    def __post_init__(self):
        a = np.array(self.coeff, dtype=np.complex128)
        if a.ndim != 4 or a.shape[0] != a.shape[1] or a.shape[2] != a.shape[3]:
            raise ValueError("coefficient tensor must have shape (M, M, n, n)")
        if a.shape[2] not in (2, 3):
            raise ValueError("ambient dimension n must be 2 or 3")
        a.setflags(write=False)
        object.__setattr__(self, "coeff", a)
        xi = _unit_directions(a.shape[2], N_ELLIPTIC_SAMPLES)
        A = _symbol(a, xi)
        H = 0.5 * (A + np.conj(np.swapaxes(A, 1, 2)))
        w, v = np.linalg.eigh(H)
        i = int(np.argmin(w[:, 0]))
        kappa = float(w[i, 0])
        if not kappa > 0:
            raise EllipticityError(
                f"Legendre-Hadamard form is {kappa:.3e} <= 0 at xi={xi[i]}",
                xi=xi[i], eta=v[i, :, 0], value=kappa,
            )
        object.__setattr__(self, "kappa_o", kappa)

    @property
    def M(self) -> int:
        return self.coeff.shape[0]

    @property
    def n(self) -> int:
        return self.coeff.shape[2]

    @property
    def coeff_norm(self) -> float:
        return float(np.linalg.norm(self.coeff.ravel()))

    def pencil(self, xi: np.ndarray):
        """(B2, B1(xi), B0(xi)) for xi of shape (F, n-1)."""
        a, n = self.coeff, self.n
        xi = np.asarray(xi, float).reshape(-1, n - 1)
        B2 = a[:, :, n - 1, n - 1]
        B1 = np.einsum("abj,fj->fab", a[:, :, : n - 1, n - 1] + a[:, :, n - 1, : n - 1], xi)
        B0 = np.einsum("abjk,fj,fk->fab", a[:, :, : n - 1, : n - 1], xi, xi)
        return B2, B1, B0

    def describe(self) -> dict:
        if self.name == "custom":
            return {"name": "custom", "coeff_sha": _array_digest(self.coeff)}
        return {"name": self.name, "params": _jsonable(self.params)}


def _array_digest(a: np.ndarray) -> str:
    import hashlib

    return hashlib.sha256(np.ascontiguousarray(a).tobytes()).hexdigest()[:16]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    return obj


DEFAULT_DIVA = {
    2: [[1.0, 0.3 + 0.2j], [-0.1 + 0.1j, 1.5]],
    3: [[1.0, 0.2, 0.1j], [0.0, 1.3, 0.2], [0.1, -0.1j, 0.8]],
}


def _laplacian(n):
    a = np.zeros((1, 1, n, n), complex)
    a[0, 0] = np.eye(n)
    return a


def _scalar_diva(n, A=None):
    A = np.asarray(DEFAULT_DIVA[n] if A is None else A, dtype=complex)
    if A.shape != (n, n):
        raise ValueError(f"scalar_divA needs an {n}x{n} matrix A")
    # scalar ellipticity condition: inf over the sphere of Re[A xi . xi] > 0
    xi = _unit_directions(n, N_ELLIPTIC_SAMPLES)
    form = np.einsum("rs,fr,fs->f", A, xi, xi).real
    i = int(np.argmin(form))
    if not form[i] > 0:
        raise EllipticityError(
            f"Re[A xi . xi] = {form[i]:.3e} <= 0 at xi={xi[i]}", xi=xi[i], eta=np.ones(1), value=form[i]
        )
    return A[None, None]


def _lame(n, mu=1.0, lam=1.0):
    mu, lam = float(mu), float(lam)
    if not (mu > 0 and 2 * mu + lam > 0):
        raise EllipticityError(
            f"Lame moduli need mu > 0 and 2 mu + lambda > 0 (mu={mu}, lambda={lam})",
            value=min(mu, 2 * mu + lam),
        )
    d = np.eye(n)
    # mu delta_ab delta_rs + (lambda + mu) delta_ar delta_bs
    return (mu * np.einsum("ab,rs->abrs", d, d) + (lam + mu) * np.einsum("ar,bs->abrs", d, d)).astype(complex)


SYSTEMS = {
    "laplacian": _laplacian,
    "scalar_divA": _scalar_diva,
    "lame": _lame,
}


def named_system(name: str, n: int = 2, **params) -> EllipticSystem:
    """Build one of the reference systems ``laplacian``, ``scalar_divA``, ``lame``."""
    if name not in SYSTEMS:
        raise ValueError(f"unknown system {name!r}; expected one of {sorted(SYSTEMS)}")
    if n not in (2, 3):
        raise ValueError("ambient dimension n must be 2 or 3")
    coeff = SYSTEMS[name](n, **params)
    return EllipticSystem(coeff, name=name, params=dict(params, n=n))


def system_from_coefficients(coeff) -> EllipticSystem:
    return EllipticSystem(np.asarray(coeff, dtype=complex))


# ---------------------------------------------------------------------------
# solvents


def _residual(system: EllipticSystem, xi: np.ndarray, Lam: np.ndarray) -> np.ndarray:
    B2, B1, B0 = system.pencil(xi)
    R = B2 @ Lam @ Lam + 1j * B1 @ Lam - B0
    return np.linalg.norm(R, axis=(1, 2))


def _residual_bound(system: EllipticSystem, xi: np.ndarray) -> np.ndarray:
    return RESIDUAL_TOL * (1 + (xi ** 2).sum(axis=1)) * system.coeff_norm


def _companion(system: EllipticSystem, xi: np.ndarray) -> np.ndarray:
    B2, B1, B0 = system.pencil(xi)
    M = system.M
    B2i = np.linalg.inv(B2)
    F = xi.shape[0]
    C = np.zeros((F, 2 * M, 2 * M), complex)
    C[:, :M, M:] = np.eye(M)
    C[:, M:, :M] = B2i @ B0
    C[:, M:, M:] = -1j * (B2i @ B1)
    return C


def _schur_solvent(C: np.ndarray, M: int, xi) -> np.ndarray:
    T, Z, sdim = sla.schur(C, output="complex", sort="lhp")
    if sdim != M:
        raise NumericalFault(f"stable eigenvalue count {sdim} != M={M} at xi={xi}")
    Z1, Z2 = Z[:M, :M], Z[M:, :M]
    if np.linalg.cond(Z1) > SCHUR_COND_ABORT:
        raise NumericalFault(f"stable Schur basis is singular at xi={xi}")
    return np.linalg.solve(Z1.T, Z2.T).T


def solvents(system: EllipticSystem, xi: np.ndarray, return_info: bool = False):
    """Stable solvents for a stack of nonzero frequencies xi, shape (F, n-1).

    Eigenvectors of the companion matrix are used when they are well
    conditioned; otherwise (e.g. the defective Lame pencil) the ordered
    complex Schur form supplies an orthonormal basis of the stable subspace.
    """
    xi = np.asarray(xi, float).reshape(-1, system.n - 1)
    norms = np.sqrt((xi ** 2).sum(axis=1))
    if np.any(norms == 0):
        raise ValueError("solvent is undefined at xi = 0")
    M = system.M
    C = _companion(system, xi)
    w, V = np.linalg.eig(C)
    tol = 1e-9 * norms[:, None]
    n_stable = (w.real < -tol).sum(axis=1)
    n_unstable = (w.real > tol).sum(axis=1)
    bad = (n_stable != M) | (n_unstable != M)
    if np.any(bad):
        i = int(np.flatnonzero(bad)[0])
        raise NumericalFault(
            f"stable/unstable eigenvalue count ({n_stable[i]}, {n_unstable[i]}) != M={M} at xi={xi[i]}"
        )
    order = np.argsort(w.real, axis=1)[:, :M]
    lam = np.take_along_axis(w, order, axis=1)
    X = np.take_along_axis(V[:, :M, :], order[:, None, :], axis=2)
    cond = np.linalg.cond(X)
    ok = np.isfinite(cond) & (cond < EIG_COND_FALLBACK)
    Lam = np.empty((xi.shape[0], M, M), complex)
    if np.any(ok):
        Xo = X[ok]
        XD = Xo * lam[ok][:, None, :]
        Lam[ok] = np.swapaxes(np.linalg.solve(np.swapaxes(Xo, 1, 2), np.swapaxes(XD, 1, 2)), 1, 2)
    res = np.full(xi.shape[0], np.inf)
    if np.any(ok):
        res[ok] = _residual(system, xi[ok], Lam[ok])
    redo = ~(res <= _residual_bound(system, xi))
    for i in np.flatnonzero(redo):
        Lam[i] = _schur_solvent(C[i], M, xi[i])
    if np.any(redo):
        res[redo] = _residual(system, xi[redo], Lam[redo])
    worst = res / _residual_bound(system, xi)
    if np.any(worst > 1):
        i = int(np.argmax(worst))
        raise NumericalFault(f"solvent residual {res[i]:.3e} exceeds bound at xi={xi[i]}")
    if return_info:
        return Lam, {"residual": res, "schur_fallback": int(redo.sum())}
    return Lam


def solvent(system: EllipticSystem, xi) -> np.ndarray:
    """Stable solvent Lam(xi) for a single nonzero frequency."""
    return solvents(system, np.atleast_1d(np.asarray(xi, float))[None, :])[0]


# ---------------------------------------------------------------------------
# propagator


# Pade-13 coefficients and the 1-norm bound below which no scaling is needed
_PADE13 = (64764752532480000.0, 32382376266240000.0, 7771770303897600.0,
           1187353796428800.0, 129060195264000.0, 10559470521600.0,
           670442572800.0, 33522128640.0, 1323241920.0, 40840800.0, 960960.0,
           16380.0, 182.0, 1.0)
_THETA13 = 5.371920351148152


def expm_stack(A: np.ndarray) -> np.ndarray:
    """Matrix exponential of every matrix in a stack (..., M, M).

    Scaling and squaring with the degree-13 Pade approximant; matrices are
    grouped by their squaring count so the whole stack is handled by a few
    batched products.  For the small M of this package this is several
    times faster than calling scipy.linalg.expm on the stack.
    """
    A = np.asarray(A)
    n = A.shape[-1]
    flat = A.reshape(-1, n, n)
    out = np.empty(flat.shape, dtype=np.result_type(flat.dtype, np.float64))
    norm1 = np.abs(flat).sum(axis=1).max(axis=1)
    squarings = np.maximum(0, np.ceil(np.log2(np.maximum(norm1, 1e-300) / _THETA13))).astype(int)
    b = _PADE13
    eye = np.eye(n)
    for s in np.unique(squarings):
        idx = np.flatnonzero(squarings == s)
        X = flat[idx] / 2.0 ** s
        X2 = X @ X
        X4 = X2 @ X2
        X6 = X4 @ X2
        U = X @ (X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2) + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * eye)
        V = X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2) + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * eye
        R = np.linalg.solve(V - U, V + U)
        for _ in range(s):
            R = R @ R
        out[idx] = R
    return out.reshape(A.shape)


class PoissonPropagator:
    """Per-frequency solvents Lam(xi) on a grid and cached exp(t Lam(xi)).

    Arrays are stored in FFT order with shape (*grid.shape, M, M).  The zero
    frequency carries Lam = 0, hence exp(t Lam) = I there.
    """

    cache_size = 64

    def __init__(self, system: EllipticSystem, grid: BoundaryGrid, Lam: np.ndarray,
                 info: dict, t_levels: Sequence[float] = ()):
        if system.n != grid.n:
            raise ValueError(f"system dimension n={system.n} does not match grid d+1={grid.n}")
        self.system = system
        self.grid = grid
        Lam = np.asarray(Lam)
        Lam.setflags(write=False)
        self.solvents = Lam
        self.info = dict(info)
        self.t_levels = tuple(float(t) for t in t_levels)
        self._cache: "OrderedDict[float, np.ndarray]" = OrderedDict()

    @property
    def M(self) -> int:
        return self.system.M

    @property
    def decay_rate(self) -> float:
        """c > 0 with Re(eig Lam(xi)) <= -c |xi| on every grid frequency."""
        return self.info["decay_rate"]

    def propagator(self, t: float) -> np.ndarray:
        t = float(t)
        if t < 0:
            raise ValueError("propagator time must be nonnegative")
        E = self._cache.get(t)
        if E is None:
            if self.M == 1:
                E = np.exp(t * self.solvents)
            else:
                E = expm_stack(t * self.solvents)
            E.setflags(write=False)
            self._cache[t] = E
            if len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
        else:
            self._cache.move_to_end(t)
        return E

    def generator_propagator(self, t: float) -> np.ndarray:
        """Lam(xi) exp(t Lam(xi)), the symbol of d_t P_t."""
        return self.solvents @ self.propagator(t)

    def max_residual_ratio(self) -> float:
        return float(self.info["residual_ratio"])


def _primitive_directions(grid: BoundaryGrid):
    """Integer frequency vectors m split as g * m_prim with gcd(m_prim) = 1."""
    m = np.rint(grid.frequencies() * grid.S / np.pi).astype(np.int64).reshape(-1, grid.d)
    g = np.abs(m[:, 0])
    for j in range(1, grid.d):
        g = np.gcd(g, np.abs(m[:, j]))
    nz = g > 0
    prim = np.zeros_like(m)
    prim[nz] = m[nz] // g[nz, None]
    return m, g, prim, nz


def build_propagator(system: EllipticSystem, grid: BoundaryGrid,
                     t_levels: Sequence[float] = ()) -> PoissonPropagator:
    """Solvents at every grid frequency xi = pi m / S.

    Degree-one homogeneity Lam(g xi) = g Lam(xi) is used to solve once per
    primitive lattice direction; the residual is then checked at every
    frequency.
    """
    if system.n != grid.n:
        raise ValueError(f"system dimension n={system.n} does not match grid d+1={grid.n}")
    if any(t <= 0 for t in t_levels):
        raise ValueError("t_levels must be positive")
    m, g, prim, nz = _primitive_directions(grid)
    uniq, inverse = np.unique(prim[nz], axis=0, return_inverse=True)
    inverse = np.asarray(inverse).reshape(-1)
    base, info = solvents(system, uniq.astype(float), return_info=True)
    M = system.M
    Lam = np.zeros((m.shape[0], M, M), complex)
    scale = (np.pi / grid.S) * g[nz]
    Lam[nz] = base[inverse] * scale[:, None, None]
    meta = {"schur_fallback": info["schur_fallback"], "directions": int(uniq.shape[0])}
    return propagator_from_solvents(system, grid, Lam.reshape(grid.shape + (M, M)), t_levels, meta)


def propagator_from_solvents(system: EllipticSystem, grid: BoundaryGrid, Lam: np.ndarray,
                             t_levels: Sequence[float] = (), meta: Optional[dict] = None) -> PoissonPropagator:
    """Wrap precomputed solvents (FFT order) after re-checking the residual
    bound and the stable spectrum at every nonzero frequency."""
    m, g, prim, nz = _primitive_directions(grid)
    M = system.M
    Lam = np.asarray(Lam, complex)
    if Lam.shape != grid.shape + (M, M):
        raise ValueError(f"solvent array has shape {Lam.shape}, expected {grid.shape + (M, M)}")
    flat = Lam.reshape(-1, M, M)
    if np.abs(flat[~nz]).max(initial=0.0) != 0.0:
        raise NumericalFault("solvent must vanish at the zero frequency")
    xi = m.astype(float) * (np.pi / grid.S)
    res = _residual(system, xi[nz], flat[nz])
    ratio = res / _residual_bound(system, xi[nz])
    if np.any(ratio > 1):
        i = int(np.argmax(ratio))
        raise NumericalFault(f"solvent residual exceeds bound at xi={xi[nz][i]}")
    eig = np.linalg.eigvals(flat[nz])
    rate = float(np.min(-eig.real.max(axis=1) / np.sqrt((xi[nz] ** 2).sum(axis=1))))
    if not rate > 0:
        raise NumericalFault("solvent spectrum is not in the open left half-plane")
    info = {"residual_ratio": float(ratio.max()), "residual_max": float(res.max()), "decay_rate": rate,
            "schur_fallback": 0, "directions": 0}
    info.update(meta or {})
    return PoissonPropagator(system, grid, Lam, info, t_levels)


# ---------------------------------------------------------------------------
# physical-space kernels


def _to_physical(grid: BoundaryGrid, symbol: np.ndarray) -> np.ndarray:
    axes = tuple(range(grid.d))
    k = np.fft.ifftn(symbol, axes=axes)
    return np.fft.fftshift(k, axes=axes) / grid.cell_volume


def _check_kernel_time(grid: BoundaryGrid, t: float):
    if not 0 < t <= grid.S / 4 + 1e-12:
        raise ValueError(f"kernel time t={t} must lie in (0, S/4] = (0, {grid.S / 4}]")


def kernel_array(prop: PoissonPropagator, t: float) -> np.ndarray:
    """K^L(x', t) on the grid, shape (*grid.shape, M, M)."""
    _check_kernel_time(prop.grid, t)
    return _to_physical(prop.grid, prop.propagator(t))


def kernel_field(prop: PoissonPropagator, t: float) -> SampledField:
    """K^L(., t) as a field with M*M components ordered (a, b) row-major."""
    K = kernel_array(prop, t)
    return SampledField(prop.grid, K.reshape(prop.grid.shape + (prop.M ** 2,)))


def kernel_gradient_array(prop: PoissonPropagator, t: float) -> np.ndarray:
    """(d_1 K, ..., d_d K, d_t K) at height t, shape (d+1, *shape, M, M)."""
    grid = prop.grid
    _check_kernel_time(grid, t)
    E = prop.propagator(t)
    xi = grid.frequencies()
    xi = np.where(grid.nyquist_mask(), 0.0, xi)
    out = [_to_physical(grid, 1j * xi[..., j, None, None] * E) for j in range(grid.d)]
    out.append(_to_physical(grid, prop.generator_propagator(t)))
    return np.stack(out)


def _harmonic_free(x2: np.ndarray, t: float, n: int) -> np.ndarray:
    # P_t(x') = (2/omega_{n-1}) t / (t^2 + |x'|^2)^{n/2}, omega = |S^{n-1}|
    omega = {2: 2 * np.pi, 3: 4 * np.pi}[n]
    return (2.0 / omega) * t / (t * t + x2) ** (n / 2)


def _harmonic_box_mass(lo: np.ndarray, hi: np.ndarray, t: float, d: int) -> np.ndarray:
    """Mass of the free-space harmonic kernel over the box [lo, hi] (componentwise)."""
    if d == 1:
        return (np.arctan(hi[..., 0] / t) - np.arctan(lo[..., 0] / t)) / np.pi

    def F(x, y):
        return np.arctan(x * y / (t * np.sqrt(t * t + x * x + y * y))) / (2 * np.pi)

    return (F(hi[..., 0], hi[..., 1]) - F(lo[..., 0], hi[..., 1])
            - F(hi[..., 0], lo[..., 1]) + F(lo[..., 0], lo[..., 1]))


def harmonic_kernel_exact(grid: BoundaryGrid, t: float, periodic: bool = False,
                          images: int = 16) -> SampledField:
    """Closed-form harmonic Poisson kernel P_t sampled on the grid nodes.

    With ``periodic=True`` the kernel is summed over the lattice images
    x' + 2 S k, |k|_inf <= images, and the remaining far images are replaced
    by their cell averages, computed from the exact box mass of P_t.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    x = grid.mesh()
    n = grid.n
    if not periodic:
        return SampledField(grid, _harmonic_free((x ** 2).sum(-1), t, n))
    L = 2 * grid.S
    total = np.zeros(grid.shape)
    for k in np.ndindex(*([2 * images + 1] * grid.d)):
        shift = (np.asarray(k) - images) * L
        total += _harmonic_free(((x + shift) ** 2).sum(-1), t, n)
    half = (2 * images + 1) * grid.S
    far_mass = 1.0 - _harmonic_box_mass(x - half, x + half, t, grid.d)
    total += far_mass / L ** grid.d
    return SampledField(grid, total)


# ---------------------------------------------------------------------------
# property checks


def _rel_fro(A: np.ndarray, B: np.ndarray, floor: float = 1e-300) -> np.ndarray:
    num = np.linalg.norm(A - B, axis=(-2, -1))
    den = np.maximum(np.linalg.norm(B, axis=(-2, -1)), floor)
    return num / den


def semigroup_error(prop: PoissonPropagator, t1: float, t2: float) -> float:
    """max over frequencies of |E(t1) E(t2) - E(t1+t2)| / |E(t1+t2)|."""
    E12 = prop.propagator(t1) @ prop.propagator(t2)
    return float(_rel_fro(E12, prop.propagator(t1 + t2)).max())


def normalization_error(prop: PoissonPropagator, t: float) -> float:
    """|h^d sum_x K(x, t) - I| (max entry)."""
    K = kernel_array(prop, t)
    total = K.reshape(-1, prop.M, prop.M).sum(axis=0) * prop.grid.cell_volume
    return float(np.abs(total - np.eye(prop.M)).max())


def homogeneity_error(system: EllipticSystem, grid: BoundaryGrid, t: float) -> float:
    """Relative gap between 2^{n-1} K(2x', 2t) and K(x', t) on shared nodes.

    K(., 2t) is evaluated on the grid with twice the extent (2N nodes, same
    h) so the periodic images scale together with the kernel.
    """
    big = make_grid(grid.d, 2 * grid.N, grid.h)
    K1 = kernel_array(build_propagator(system, grid), t)
    K2 = kernel_array(build_propagator(system, big), 2 * t)
    # node k of the small grid at x = (k - N/2) h maps to 2x = (2k - N) h,
    # which is node 2k of the big grid
    idx = np.ix_(*([2 * np.arange(grid.N)] * grid.d))
    K2s = K2[idx] * 2 ** grid.d
    num = np.linalg.norm(K2s - K1, axis=(-2, -1))
    den = np.linalg.norm(K1, axis=(-2, -1))
    return float((num / den).max())


def decay_constants(prop: PoissonPropagator, t: float) -> dict:
    """Fitted C in |K| <= C t (t+|x'|)^{-n} and |grad K| <= C (t+|x'|)^{-n}.

    Only nodes with |x'| <= S/2 enter, away from the periodic images.
    """
    grid = prop.grid
    r = grid.radius()
    inner = r <= grid.S / 2
    w = (t + r) ** grid.n
    K = np.linalg.norm(kernel_array(prop, t), axis=(-2, -1))
    G = np.sqrt((np.abs(kernel_gradient_array(prop, t)) ** 2).sum(axis=(0, -2, -1)))
    return {
        "C0": float((K * w / t)[inner].max()),
        "C1": float((G * w)[inner].max()),
    }


def fd_pde_residual(prop: PoissonPropagator, t: float) -> float:
    """Second-order finite-difference residual of L applied to K(., t).

    Returns max |L K| / max |K_tt| over the grid; the step is h in every
    direction, so the value decays like h^2 under refinement.
    """
    grid = prop.grid
    h, d, n = grid.h, grid.d, grid.n
    Km, K0, Kp = (kernel_array(prop, s) for s in (t - h, t, t + h))

    def dx(F, j):
        return (np.roll(F, -1, axis=j) - np.roll(F, 1, axis=j)) / (2 * h)

    def dxx(F, j):
        return (np.roll(F, -1, axis=j) - 2 * F + np.roll(F, 1, axis=j)) / h ** 2

    second = {}
    for j in range(d):
        second[(j, j)] = dxx(K0, j)
        for k in range(j + 1, d):
            second[(j, k)] = second[(k, j)] = dx(dx(K0, j), k)
        second[(j, d)] = second[(d, j)] = (dx(Kp, j) - dx(Km, j)) / (2 * h)
    second[(d, d)] = (Kp - 2 * K0 + Km) / h ** 2
    a = prop.system.coeff
    LK = np.zeros_like(K0)
    for r in range(n):
        for s in range(n):
            # (L K)_{a c} = sum_b A^{ab}_{rs} d_r d_s K_{b c}
            LK += np.einsum("ab,...bc->...ac", a[:, :, r, s], second[(r, s)])
    return float(np.abs(LK).max() / np.abs(second[(d, d)]).max())
