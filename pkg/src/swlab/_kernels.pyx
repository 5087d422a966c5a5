# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the three-dimensional residual, energy and gradient.

Same contract as :mod:`swlab._kernels_py`; one pass over interior nodes
computes every residual component, and the gradient is scattered from the
same pass.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


def residual(double[:, :, ::1] A1, double[:, :, ::1] A2, double[:, :, ::1] A3,
             cplx[:, :, ::1] alpha, cplx[:, :, ::1] beta, double h, double t):
    cdef Py_ssize_t nx = A1.shape[0], ny = A1.shape[1], nz = A1.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double inv = 1.0 / (2.0 * h)
    rt_a = np.empty((nx - 2, ny - 2, nz - 2), dtype=np.complex128)
    rb_a = np.empty_like(rt_a)
    m1_a = np.empty((nx - 2, ny - 2, nz - 2))
    m2_a = np.empty_like(m1_a)
    m3_a = np.empty_like(m1_a)
    cdef cplx[:, :, ::1] rt = rt_a, rb = rb_a
    cdef double[:, :, ::1] m1 = m1_a, m2 = m2_a, m3 = m3_a
    cdef cplx al, be, n1a, n2a, n3a, n1b, n2b, n3b, ab
    cdef cplx I = 1j
    cdef double a1, a2, a3
    with nogil:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                for k in range(1, nz - 1):
                    al = alpha[i, j, k]
                    be = beta[i, j, k]
                    a1 = A1[i, j, k]
                    a2 = A2[i, j, k]
                    a3 = A3[i, j, k]
                    n1a = (alpha[i + 1, j, k] - alpha[i - 1, j, k]) * inv - 0.5 * I * a1 * al
                    n2a = (alpha[i, j + 1, k] - alpha[i, j - 1, k]) * inv - 0.5 * I * a2 * al
                    n3a = (alpha[i, j, k + 1] - alpha[i, j, k - 1]) * inv - 0.5 * I * a3 * al
                    n1b = (beta[i + 1, j, k] - beta[i - 1, j, k]) * inv - 0.5 * I * a1 * be
                    n2b = (beta[i, j + 1, k] - beta[i, j - 1, k]) * inv - 0.5 * I * a2 * be
                    n3b = (beta[i, j, k + 1] - beta[i, j, k - 1]) * inv - 0.5 * I * a3 * be
                    rt[i - 1, j - 1, k - 1] = I * n1b + n2b + I * n3a
                    rb[i - 1, j - 1, k - 1] = I * n1a - n2a - I * n3b
                    ab = al.conjugate() * be
                    m1[i - 1, j - 1, k - 1] = ((A3[i, j + 1, k] - A3[i, j - 1, k])
                                               - (A2[i, j, k + 1] - A2[i, j, k - 1])) * inv + ab.real
                    m2[i - 1, j - 1, k - 1] = ((A1[i, j, k + 1] - A1[i, j, k - 1])
                                               - (A3[i + 1, j, k] - A3[i - 1, j, k])) * inv + ab.imag
                    m3[i - 1, j - 1, k - 1] = (((A2[i + 1, j, k] - A2[i - 1, j, k])
                                                - (A1[i, j + 1, k] - A1[i, j - 1, k])) * inv
                                               + 0.5 * (al.real * al.real + al.imag * al.imag
                                                        - be.real * be.real - be.imag * be.imag)
                                               - 0.5 * t)
    return rt_a, rb_a, m1_a, m2_a, m3_a


def energy(A1, A2, A3, alpha, beta, double h, double t):
    rt, rb, m1, m2, m3 = residual(A1, A2, A3, alpha, beta, h, t)
    return h ** 3 * float(np.sum(rt.real ** 2 + rt.imag ** 2 + rb.real ** 2 + rb.imag ** 2
                                 + m1 ** 2 + m2 ** 2 + m3 ** 2))


def energy_grad(A1, A2, A3, alpha, beta, double h, double t):
    rt_a, rb_a, m1_a, m2_a, m3_a = residual(A1, A2, A3, alpha, beta, h, t)
    cdef double w = h ** 3
    E = w * float(np.sum(rt_a.real ** 2 + rt_a.imag ** 2 + rb_a.real ** 2 + rb_a.imag ** 2
                         + m1_a ** 2 + m2_a ** 2 + m3_a ** 2))
    cdef Py_ssize_t nx = A1.shape[0], ny = A1.shape[1], nz = A1.shape[2]
    gA1_a = np.zeros((nx, ny, nz))
    gA2_a = np.zeros((nx, ny, nz))
    gA3_a = np.zeros((nx, ny, nz))
    ga_a = np.zeros((nx, ny, nz), dtype=np.complex128)
    gb_a = np.zeros((nx, ny, nz), dtype=np.complex128)
    cdef double[:, :, ::1] gA1 = gA1_a, gA2 = gA2_a, gA3 = gA3_a
    cdef cplx[:, :, ::1] ga = ga_a, gb = gb_a
    cdef cplx[:, :, ::1] rt = rt_a, rb = rb_a
    cdef double[:, :, ::1] m1 = m1_a, m2 = m2_a, m3 = m3_a
    cdef double[:, :, ::1] a1v = A1, a2v = A2, a3v = A3
    cdef cplx[:, :, ::1] alv = alpha, bev = beta
    cdef Py_ssize_t i, j, k
    cdef cplx I = 1j
    cdef cplx r_t, r_b, al, be, cr, cb, da, db
    cdef double c = -2.0 * w / (2.0 * h)  # scatter weight of the transposed difference
    cdef double q1, q2, q3, a1, a2, a3
    with nogil:
        for i in range(1, nx - 1):
            for j in range(1, ny - 1):
                for k in range(1, nz - 1):
                    r_t = rt[i - 1, j - 1, k - 1]
                    r_b = rb[i - 1, j - 1, k - 1]
                    q1 = m1[i - 1, j - 1, k - 1]
                    q2 = m2[i - 1, j - 1, k - 1]
                    q3 = m3[i - 1, j - 1, k - 1]
                    al = alv[i, j, k]
                    be = bev[i, j, k]
                    a1 = a1v[i, j, k]
                    a2 = a2v[i, j, k]
                    a3 = a3v[i, j, k]
                    # Dirac part: the difference stencils scatter to neighbours
                    # (transpose of d_j is minus the shifted difference).
                    # alpha receives -i N3^H rt - i N1^H rb - N2^H rb
                    da = -I * r_b
                    ga[i + 1, j, k] = ga[i + 1, j, k] - c * da
                    ga[i - 1, j, k] = ga[i - 1, j, k] + c * da
                    da = -r_b
                    ga[i, j + 1, k] = ga[i, j + 1, k] - c * da
                    ga[i, j - 1, k] = ga[i, j - 1, k] + c * da
                    da = -I * r_t
                    ga[i, j, k + 1] = ga[i, j, k + 1] - c * da
                    ga[i, j, k - 1] = ga[i, j, k - 1] + c * da
                    # beta receives -i N1^H rt + N2^H rt + i N3^H rb
                    db = -I * r_t
                    gb[i + 1, j, k] = gb[i + 1, j, k] - c * db
                    gb[i - 1, j, k] = gb[i - 1, j, k] + c * db
                    db = r_t
                    gb[i, j + 1, k] = gb[i, j + 1, k] - c * db
                    gb[i, j - 1, k] = gb[i, j - 1, k] + c * db
                    db = I * r_b
                    gb[i, j, k + 1] = gb[i, j, k + 1] - c * db
                    gb[i, j, k - 1] = gb[i, j, k - 1] + c * db
                    # zeroth-order parts: (i/2) A_j multiplications and sigma terms
                    ga[i, j, k] = ga[i, j, k] + 2.0 * w * (
                        -I * (0.5 * I * a3 * r_t) - I * (0.5 * I * a1 * r_b) - 0.5 * I * a2 * r_b
                        + (q1 - I * q2) * be + q3 * al)
                    gb[i, j, k] = gb[i, j, k] + 2.0 * w * (
                        -I * (0.5 * I * a1 * r_t) + 0.5 * I * a2 * r_t + I * (0.5 * I * a3 * r_b)
                        + (q1 + I * q2) * al - q3 * be)
                    cr = r_t.conjugate()
                    cb = r_b.conjugate()
                    gA1[i, j, k] = gA1[i, j, k] + w * (cr * I * be + cb * I * al).imag
                    gA2[i, j, k] = gA2[i, j, k] + w * (cr * be - cb * al).imag
                    gA3[i, j, k] = gA3[i, j, k] + w * (cr * I * al - cb * I * be).imag
                    # curvature part: 2 w curl^T m
                    gA1[i, j, k + 1] -= c * q2
                    gA1[i, j, k - 1] += c * q2
                    gA1[i, j + 1, k] += c * q3
                    gA1[i, j - 1, k] -= c * q3
                    gA2[i, j, k + 1] += c * q1
                    gA2[i, j, k - 1] -= c * q1
                    gA2[i + 1, j, k] -= c * q3
                    gA2[i - 1, j, k] += c * q3
                    gA3[i, j + 1, k] -= c * q1
                    gA3[i, j - 1, k] += c * q1
                    gA3[i + 1, j, k] += c * q2
                    gA3[i - 1, j, k] -= c * q2
    return E, gA1_a, gA2_a, gA3_a, ga_a, gb_a
