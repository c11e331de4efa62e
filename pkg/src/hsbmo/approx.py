"""Moduli of continuity, the Psi integral, and the three VMO oracles
(vertical approximation, mollification, translation)."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import integrate

from .exceptions import NumericalFault
from .extension import extend_levels
from .grid import BoundaryGrid, SampledField, translate
from .kernels import PoissonPropagator
from .seminorms import (
    bmo_norm,
    decay_verdict,
    fit_loglog_slope,
    holder_seminorm,
    pair_difference_table,
    random_pair_differences,
)

__all__ = [
    "upsilon_sharp",
    "ModulusOfContinuity",
    "psi",
    "psi_bound",
    "psi_refined_bound",
    "psi_bound_check",
    "upsilon_seminorm",
    "DecayTable",
    "vmo_approximation_run",
    "Mollifier",
    "make_mollifier",
    "mollifier_convergence",
    "translation_test",
    "default_scale_ladder",
]


def upsilon_sharp(s):
    """min(1, s) + max(0, ln s) for s >= 0; works elementwise on arrays."""
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("upsilon_sharp is defined for s >= 0")
    with np.errstate(divide="ignore"):
        out = np.minimum(1.0, s) + np.where(s > 1, np.log(np.maximum(s, 1.0)), 0.0)
    return out if out.ndim else float(out)


@dataclass(frozen=True)
class ModulusOfContinuity:
    """A nondecreasing s -> Upsilon(s) with Upsilon(0+) = 0."""

    evaluator: Callable
    tag: str = "custom"

    def __post_init__(self):
        s = np.concatenate(([0.0], np.logspace(-12, 6, 400)))
        v = np.asarray(self.evaluator(s), dtype=float)
        if v.shape != s.shape or not np.all(np.isfinite(v)):
            raise ValueError(f"modulus {self.tag!r} must map arrays to finite arrays")
        if abs(v[0]) > 1e-12:
            raise ValueError(f"modulus {self.tag!r} must vanish at 0")
        if np.any(np.diff(v) < -1e-12 * np.maximum(1.0, np.abs(v[1:]))):
            raise ValueError(f"modulus {self.tag!r} is not nondecreasing")

    def __call__(self, s):
        return np.asarray(self.evaluator(np.asarray(s, dtype=float)), dtype=float)

    @classmethod
    def sharp(cls) -> "ModulusOfContinuity":
        return cls(upsilon_sharp, "sharp")

    @classmethod
    def power(cls, eta: float) -> "ModulusOfContinuity":
        if not 0 < eta <= 1:
            raise ValueError("power modulus needs eta in (0, 1]")
        return cls(lambda s: np.asarray(s, float) ** eta, f"power:{eta:g}")


# ---------------------------------------------------------------------------
# Psi(a) = int_0^inf s^(n-1) (a+s)^(-n) Upsilon_#(s) ds/s


def _psi_integrand(sig, a, n):
    s = np.exp(sig)
    return s ** (n - 1) * (a + s) ** (-n) * upsilon_sharp(s)


def _psi_support(a: float, n: int, rel: float = 1e-14):
    grid = np.linspace(-80.0, 80.0, 4001)
    vals = _psi_integrand(grid, a, n)
    peak = vals.max()
    above = np.nonzero(vals >= rel * peak)[0]
    lo = grid[max(above[0] - 1, 0)]
    hi = grid[min(above[-1] + 1, grid.size - 1)]
    return lo, hi


def psi(a: float, n: int = 2, rel_tol: float = 1e-10) -> float:
    """Psi(a) by adaptive quadrature in log s, truncated where the integrand
    drops below 1e-14 of its peak.  Breakpoints sit at s = 1 and s = a."""
    if not a > 0:
        raise ValueError("a must be positive")
    if n < 2:
        raise ValueError("n must be at least 2")
    lo, hi = _psi_support(a, n)
    pts = sorted(p for p in {0.0, float(np.log(a))} if lo < p < hi)
    edges = [lo] + pts + [hi]
    total = 0.0
    err = 0.0
    for x0, x1 in zip(edges[:-1], edges[1:]):
        v, e = integrate.quad(_psi_integrand, x0, x1, args=(a, n), limit=200,
                              epsabs=0.0, epsrel=1e-12)
        total += v
        err += e
    if err > rel_tol * max(total, 1e-300):
        raise NumericalFault(f"Psi quadrature did not converge at a={a} (error {err:.3g})")
    return float(total)


def psi_bound(a: float) -> float:
    return 3.0 * (1.0 + max(0.0, np.log(1.0 / a)))


def psi_refined_bound(a: float) -> float:
    """1 + ln(1/a) for a <= 1 and 3 (1 + ln a)/a for a > 1."""
    return float(1.0 + np.log(1.0 / a)) if a <= 1 else float(3.0 * (1.0 + np.log(a)) / a)


def psi_bound_check(a: float, n: int = 2):
    """(Psi(a), 3 (1 + log+(1/a)), Psi(a) <= bound)."""
    value = psi(a, n)
    bound = psi_bound(a)
    return value, bound, bool(value <= bound)


# ---------------------------------------------------------------------------


def upsilon_seminorm(f: SampledField, modulus: ModulusOfContinuity, seed: int = 0,
                     radius: int = 64, n_random: int = 100_000) -> float:
    """sup |f(a) - f(b)| / Upsilon(|a - b|) over the Hoelder pair policy."""
    dist, D = pair_difference_table(f, radius)
    if n_random:
        rd, rdiff = random_pair_differences(f, n_random, seed)
        dist = np.concatenate([dist, rd])
        D = np.concatenate([D, rdiff])
    if dist.size == 0:
        return 0.0
    ups = modulus(dist)
    scale = max(float(np.abs(f.values).max()), 1e-300)
    nonzero = D > 1e-14 * scale
    if np.any(nonzero & (ups <= 0)):
        return float("inf")
    ok = ups > 0
    return float((D[ok] / ups[ok]).max()) if np.any(ok) else 0.0


@dataclass(frozen=True)
class DecayTable:
    """Rows of (scale, BMO distance) plus extra per-row columns and a verdict."""

    scales: np.ndarray
    values: np.ndarray
    verdict: str
    ratio: float
    thresholds: tuple
    columns: dict = field(default_factory=dict)

    def slope(self) -> float:
        return fit_loglog_slope(self.scales, self.values)

    def to_rows(self):
        names = sorted(self.columns)
        rows = []
        for i, (s, v) in enumerate(zip(self.scales, self.values)):
            rows.append((float(s), float(v)) + tuple(float(self.columns[k][i]) for k in names))
        return rows


def _decay_table(scales, values, vanish, persist, columns=None) -> DecayTable:
    scales = np.asarray(scales, float)
    values = np.asarray(values, float)
    i_small = int(np.argmin(scales))
    i_large = int(np.argmax(scales))
    small, large = values[i_small], values[i_large]
    ratio = float(small / large) if large > 0 else 0.0
    verdict = decay_verdict(small, large, vanish, persist)
    return DecayTable(scales, values, verdict, ratio, (vanish, persist), dict(columns or {}))


def default_scale_ladder(grid: BoundaryGrid, points: int = 8, top: Optional[float] = None) -> np.ndarray:
    """Geometric ladder from h to ``top`` (default S/2) with ``points`` entries."""
    top = grid.S / 2 if top is None else top
    return np.geomspace(grid.h, top, points)


def _horizontal_grad_sup(values: np.ndarray, grid: BoundaryGrid) -> float:
    axes = tuple(range(grid.d))
    F = np.fft.fftn(values, axes=axes)
    xi = np.where(grid.nyquist_mask(), 0.0, grid.frequencies())
    sq = np.zeros(grid.shape)
    for j in range(grid.d):
        g = np.fft.ifftn(1j * xi[..., j][..., None] * F, axes=axes)
        sq += (np.abs(g) ** 2).sum(axis=-1)
    return float(np.sqrt(sq.max()))


def vmo_approximation_run(f: SampledField, prop: PoissonPropagator, eps_ladder: Sequence[float],
                          etas: Sequence[float] = (), p: float = 2.0, vanish: float = 0.1,
                          persist: float = 0.5, seed: int = 0) -> DecayTable:
    """For each eps: f_eps = u(., eps) and ||f - f_eps||_BMO, with optional
    Hoelder seminorms of f_eps and the sup of its horizontal gradient."""
    eps = np.asarray(eps_ladder, float)
    if eps.size == 0 or np.any(eps <= 0):
        raise ValueError("eps ladder must hold positive values")
    vals, _ = extend_levels(f, prop, eps, with_gradient=False)
    dist, grads = [], []
    hold = {f"holder_{e:g}": [] for e in etas}
    for k in range(eps.size):
        fe = SampledField(f.grid, vals[k])
        dist.append(bmo_norm(f - fe, p))
        grads.append(_horizontal_grad_sup(vals[k], f.grid))
        for e in etas:
            hold[f"holder_{e:g}"].append(holder_seminorm(fe, e, seed=seed))
    cols = {"grad_sup": grads, **hold}
    return _decay_table(eps, dist, vanish, persist, cols)


# ---------------------------------------------------------------------------
# mollifiers

DECAY_EPS = 0.5
DECAY_CONST = 10.0


def _gaussian(r, d):
    return (2 * np.pi) ** (-d / 2) * np.exp(-0.5 * r ** 2)


def _harmonic_poisson(r, d):
    n = d + 1
    omega = {2: 2 * np.pi, 3: 4 * np.pi}[n]
    return (2.0 / omega) * (1.0 + r ** 2) ** (-n / 2)


@lru_cache(maxsize=None)
def _bump_mass(d: int) -> float:
    rr = np.linspace(0, 1, 200001)[:-1]
    prof = np.exp(1.0 - 1.0 / (1.0 - rr ** 2))
    shell = 2.0 if d == 1 else 2 * np.pi * rr
    return float(np.trapezoid(prof * shell, rr))


def _bump_kernel(r, d):
    out = np.zeros_like(r)
    inside = r < 1
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - r[inside] ** 2))
    return out / _bump_mass(d)


_PROFILES = {"gaussian": _gaussian, "harmonic_poisson": _harmonic_poisson, "bump": _bump_kernel}


@dataclass(frozen=True)
class Mollifier:
    name: str
    profile: Callable

    def sample(self, grid: BoundaryGrid, t: float) -> np.ndarray:
        """phi_t on the grid, normalized to unit grid integral."""
        if not t > 0:
            raise ValueError("mollifier scale must be positive")
        phi = self.profile(grid.radius() / t, grid.d) / t ** grid.d
        mass = phi.sum() * grid.cell_volume
        if not mass > 0:
            raise ValueError(f"mollifier {self.name} has no mass at scale {t}")
        return phi / mass

    def multiplier(self, grid: BoundaryGrid, t: float) -> np.ndarray:
        phi = self.sample(grid, t)
        axes = tuple(range(grid.d))
        return np.fft.fftn(np.fft.ifftshift(phi, axes=axes), axes=axes).real * grid.cell_volume


def make_mollifier(name: str, d: int = 1) -> Mollifier:
    """One of gaussian / harmonic_poisson / bump, after checking unit integral
    and the decay bound phi(r) (1 + r)^(d + 1/2) <= 10 at sampled radii."""
    if name not in _PROFILES:
        raise ValueError(f"unknown mollifier {name!r}; expected one of {sorted(_PROFILES)}")
    prof = _PROFILES[name]
    r = np.concatenate(([0.0], np.logspace(-3, 4, 300)))
    vals = prof(r, d)
    if np.any(vals < 0) or not np.all(np.isfinite(vals)):
        raise ValueError(f"mollifier {name} is not a finite nonnegative profile")
    if np.max(vals * (1 + r) ** (d + DECAY_EPS)) > DECAY_CONST:
        raise ValueError(f"mollifier {name} fails the decay hypothesis")
    # radial mass over R^d
    rr = np.concatenate((np.linspace(0, 2, 20001), np.geomspace(2, 1e7, 20001)[1:]))
    shell = 2.0 if d == 1 else 2 * np.pi * rr
    mass = np.trapezoid(prof(rr, d) * shell, rr)
    if abs(mass - 1) > 1e-3:
        raise ValueError(f"mollifier {name} does not have unit integral (mass {mass:.6f})")
    return Mollifier(name, prof)


def mollifier_convergence(f: SampledField, kernel: str = "gaussian",
                          t_ladder: Optional[Sequence[float]] = None, p: float = 2.0,
                          vanish: float = 0.1, persist: float = 0.5) -> DecayTable:
    """Rows (t, ||phi_t * f - f||_BMO) by multiplication on the frequency side."""
    grid = f.grid
    moll = make_mollifier(kernel, grid.d)
    t = default_scale_ladder(grid) if t_ladder is None else np.asarray(t_ladder, float)
    axes = tuple(range(grid.d))
    F = np.fft.fftn(f.values, axes=axes)
    out = []
    for tk in t:
        mult = moll.multiplier(grid, tk)[..., None]
        g = np.fft.ifftn(F * mult, axes=axes)
        out.append(bmo_norm(SampledField(grid, g - f.values), p))
    return _decay_table(t, out, vanish, persist)


def _ray_ladder(grid: BoundaryGrid, points: int = 8, top: Optional[float] = None) -> list:
    top_nodes = (grid.N // 4) if top is None else max(1, int(round(top / grid.h)))
    steps = np.unique(np.rint(np.geomspace(1, top_nodes, points)).astype(int))
    return [[int(s)] + [0] * (grid.d - 1) for s in steps]


def translation_test(f: SampledField, z_ladder: Optional[Sequence[Sequence[int]]] = None,
                     p: float = 2.0, vanish: float = 0.1, persist: float = 0.5) -> DecayTable:
    """Rows (|z|, ||tau_z f - f||_BMO) for lattice shifts z along rays toward 0."""
    grid = f.grid
    zs = _ray_ladder(grid) if z_ladder is None else [list(map(int, z)) for z in z_ladder]
    if not zs:
        raise ValueError("translation ladder is empty")
    norms = [float(np.sqrt(np.sum(np.square(z)))) * grid.h for z in zs]
    if min(norms) <= 0:
        raise ValueError("translation ladder must not contain the zero shift")
    vals = [bmo_norm(translate(f, z) - f, p) for z in zs]
    return _decay_table(norms, vals, vanish, persist)
