"""Numpy reference kernels for the three-dimensional equations.

All arrays are full-grid ``(nx, ny, nz)``; residuals live on interior nodes
and are returned with the interior shape.  The stored connection ``A`` is
the determinant-line connection, so spinors see ``d - (i/2) A``.

Residual components (see :mod:`swlab.sw3d`)::

    rt = i N1 beta + N2 beta + i N3 alpha
    rb = i N1 alpha - N2 alpha - i N3 beta            (N_j = d_j - (i/2) A_j)
    m1 = (curl A)_1 + Re(conj(alpha) beta)
    m2 = (curl A)_2 + Im(conj(alpha) beta)
    m3 = (curl A)_3 + (|alpha|^2 - |beta|^2)/2 - t/2
"""

import numpy as np

I = (slice(1, -1),) * 3


def _d(f, axis, h):
    """Central difference at interior nodes."""
    lo = [slice(1, -1)] * 3
    hi = [slice(1, -1)] * 3
    lo[axis] = slice(0, -2)
    hi[axis] = slice(2, None)
    return (f[tuple(hi)] - f[tuple(lo)]) / (2 * h)


def _dT(r, axis, h):
    """Transpose of :func:`_d`: interior residual -> full-grid field."""
    pad = np.zeros(tuple(n + 4 for n in r.shape), dtype=r.dtype)
    pad[(slice(2, -2),) * 3] = r
    lo = [slice(1, -1)] * 3
    hi = [slice(1, -1)] * 3
    lo[axis] = slice(0, -2)
    hi[axis] = slice(2, None)
    return (pad[tuple(lo)] - pad[tuple(hi)]) / (2 * h)


def residual(A1, A2, A3, alpha, beta, h, t):
    al, be = alpha[I], beta[I]
    a1, a2, a3 = A1[I], A2[I], A3[I]

    def nab(f, fi, ax, a):
        return _d(f, ax, h) - 0.5j * a * fi

    n1a, n2a, n3a = nab(alpha, al, 0, a1), nab(alpha, al, 1, a2), nab(alpha, al, 2, a3)
    n1b, n2b, n3b = nab(beta, be, 0, a1), nab(beta, be, 1, a2), nab(beta, be, 2, a3)
    rt = 1j * n1b + n2b + 1j * n3a
    rb = 1j * n1a - n2a - 1j * n3b
    ab = np.conj(al) * be
    m1 = _d(A3, 1, h) - _d(A2, 2, h) + ab.real
    m2 = _d(A1, 2, h) - _d(A3, 0, h) + ab.imag
    m3 = _d(A2, 0, h) - _d(A1, 1, h) + 0.5 * (np.abs(al) ** 2 - np.abs(be) ** 2) - 0.5 * t
    return rt, rb, m1, m2, m3


def energy(A1, A2, A3, alpha, beta, h, t):
    rt, rb, m1, m2, m3 = residual(A1, A2, A3, alpha, beta, h, t)
    return h**3 * float(np.sum(np.abs(rt) ** 2 + np.abs(rb) ** 2 + m1**2 + m2**2 + m3**2))


def energy_grad(A1, A2, A3, alpha, beta, h, t):
    """Energy and its gradient; complex gradients are d/dRe + i d/dIm."""
    rt, rb, m1, m2, m3 = residual(A1, A2, A3, alpha, beta, h, t)
    w = h**3
    E = w * float(np.sum(np.abs(rt) ** 2 + np.abs(rb) ** 2 + m1**2 + m2**2 + m3**2))
    al, be = alpha[I], beta[I]
    a = (A1[I], A2[I], A3[I])

    def nabH(r, ax):
        out = _dT(r, ax, h)
        out[I] += 0.5j * a[ax] * r
        return out

    ga = 2 * w * (-1j * nabH(rt, 2) - 1j * nabH(rb, 0) - nabH(rb, 1))
    gb = 2 * w * (-1j * nabH(rt, 0) + nabH(rt, 1) + 1j * nabH(rb, 2))
    ga[I] += 2 * w * ((m1 - 1j * m2) * be + m3 * al)
    gb[I] += 2 * w * ((m1 + 1j * m2) * al - m3 * be)

    cr, cb = np.conj(rt), np.conj(rb)
    gA1 = np.zeros(A1.shape)
    gA2 = np.zeros(A1.shape)
    gA3 = np.zeros(A1.shape)
    gA1[I] = w * np.imag(cr * 1j * be + cb * 1j * al)
    gA2[I] = w * np.imag(cr * be - cb * al)
    gA3[I] = w * np.imag(cr * 1j * al - cb * 1j * be)
    gA1 += 2 * w * (_dT(m2, 2, h) - _dT(m3, 1, h))
    gA2 += 2 * w * (-_dT(m1, 2, h) + _dT(m3, 0, h))
    gA3 += 2 * w * (_dT(m1, 1, h) - _dT(m2, 0, h))
    return E, gA1, gA2, gA3, ga, gb
