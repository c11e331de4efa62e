"""Compiled inner loops for oscillation and pair sweeps.

Window routines receive periodically extended arrays so the inner loops
carry no modulo arithmetic.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _finish(s, count, p):
    return (s / count) ** (1.0 / p)


@njit(cache=True, nogil=True)
def osc_sup_real_1d(fe, N, w, p):
    """Sup over the N periodic windows of w nodes of (mean |f - f_Q|^p)^(1/p), real data."""
    best = 0.0
    arg = 0
    s0 = 0.0
    for i in range(w):
        s0 += fe[i]
    for i0 in range(N):
        if i0 > 0:
            s0 += fe[i0 + w - 1] - fe[i0 - 1]
        m = s0 / w
        s = 0.0
        if p == 1.0:
            for i in range(i0, i0 + w):
                s += abs(fe[i] - m)
        else:
            for i in range(i0, i0 + w):
                z = fe[i] - m
                s += z * z
        v = _finish(s, w, p)
        if v > best:
            best = v
            arg = i0
    return best, arg


@njit(cache=True, nogil=True)
def osc_sup_real_2d(fe, N, w, p):
    P = np.zeros((N + w, N + w))
    for i in range(N + w - 1):
        for j in range(N + w - 1):
            P[i + 1, j + 1] = fe[i, j] + P[i, j + 1] + P[i + 1, j] - P[i, j]
    area = w * w
    best = 0.0
    a0 = 0
    a1 = 0
    for i0 in range(N):
        for j0 in range(N):
            m = (P[i0 + w, j0 + w] - P[i0, j0 + w] - P[i0 + w, j0] + P[i0, j0]) / area
            s = 0.0
            if p == 1.0:
                for i in range(i0, i0 + w):
                    for j in range(j0, j0 + w):
                        s += abs(fe[i, j] - m)
            else:
                for i in range(i0, i0 + w):
                    for j in range(j0, j0 + w):
                        z = fe[i, j] - m
                        s += z * z
            v = _finish(s, area, p)
            if v > best:
                best = v
                a0 = i0
                a1 = j0
    return best, a0, a1


@njit(cache=True, nogil=True)
def _dev(fe_row, mean, p):
    acc = 0.0
    for c in range(fe_row.shape[0]):
        z = fe_row[c] - mean[c]
        acc += z.real * z.real + z.imag * z.imag
    if p == 2.0:
        return acc
    return np.sqrt(acc)


@njit(cache=True, nogil=True)
def osc_sup_complex_1d(fe, N, w, p):
    """Vector-valued variant; fe has shape (N + w - 1, M)."""
    M = fe.shape[1]
    P = np.zeros((N + w, M), np.complex128)
    for i in range(N + w - 1):
        for c in range(M):
            P[i + 1, c] = P[i, c] + fe[i, c]
    mean = np.empty(M, np.complex128)
    best = 0.0
    arg = 0
    for i0 in range(N):
        for c in range(M):
            mean[c] = (P[i0 + w, c] - P[i0, c]) / w
        s = 0.0
        for i in range(i0, i0 + w):
            s += _dev(fe[i], mean, p)
        v = _finish(s, w, p)
        if v > best:
            best = v
            arg = i0
    return best, arg


@njit(cache=True, nogil=True)
def osc_sup_complex_2d(fe, N, w, p):
    M = fe.shape[2]
    P = np.zeros((N + w, N + w, M), np.complex128)
    for i in range(N + w - 1):
        for j in range(N + w - 1):
            for c in range(M):
                P[i + 1, j + 1, c] = fe[i, j, c] + P[i, j + 1, c] + P[i + 1, j, c] - P[i, j, c]
    area = w * w
    mean = np.empty(M, np.complex128)
    best = 0.0
    a0 = 0
    a1 = 0
    for i0 in range(N):
        for j0 in range(N):
            for c in range(M):
                mean[c] = (P[i0 + w, j0 + w, c] - P[i0, j0 + w, c] - P[i0 + w, j0, c] + P[i0, j0, c]) / area
            s = 0.0
            for i in range(i0, i0 + w):
                for j in range(j0, j0 + w):
                    s += _dev(fe[i, j], mean, p)
            v = _finish(s, area, p)
            if v > best:
                best = v
                a0 = i0
                a1 = j0
    return best, a0, a1


@njit(cache=True, nogil=True)
def _shift_diff_1d(f, offsets):
    out = np.zeros(offsets.shape[0])
    N = f.shape[0]
    M = f.shape[1]
    for q in range(offsets.shape[0]):
        o = offsets[q, 0] % N
        best = 0.0
        for i in range(N):
            ii = i + o
            if ii >= N:
                ii -= N
            acc = 0.0
            for c in range(M):
                z = f[ii, c] - f[i, c]
                acc += z.real * z.real + z.imag * z.imag
            if acc > best:
                best = acc
        out[q] = np.sqrt(best)
    return out


@njit(cache=True, nogil=True)
def _shift_diff_2d(f, offsets):
    out = np.zeros(offsets.shape[0])
    N = f.shape[0]
    M = f.shape[2]
    for q in range(offsets.shape[0]):
        o0 = offsets[q, 0] % N
        o1 = offsets[q, 1] % N
        best = 0.0
        for i in range(N):
            ii = i + o0
            if ii >= N:
                ii -= N
            for j in range(N):
                jj = j + o1
                if jj >= N:
                    jj -= N
                acc = 0.0
                for c in range(M):
                    z = f[ii, jj, c] - f[i, j, c]
                    acc += z.real * z.real + z.imag * z.imag
                if acc > best:
                    best = acc
        out[q] = np.sqrt(best)
    return out


def max_shift_difference(f, offsets):
    """For each lattice offset o: max over x of |f(x + o) - f(x)| (periodic)."""
    if offsets.shape[1] == 1:
        return _shift_diff_1d(f, offsets)
    return _shift_diff_2d(f, offsets)
