# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Chambolle kernels: fused stencil loops, DCT products through BLAS."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite
from scipy.linalg.cython_blas cimport dgemm

from ._kernels_py import NumericalDivergence
from .spectral import dct_matrix, inverse_eigenvalues

cnp.import_array()

BACKEND = "cython"


cdef void _div(const double[:, ::1] px, const double[:, ::1] py, double[:, ::1] out,
               double inv_h) noexcept nogil:
    cdef Py_ssize_t n2 = px.shape[0], n1 = px.shape[1], i, j
    cdef double a, b
    for i in range(n2):
        for j in range(n1):
            if n1 == 1:
                a = 0.0
            elif j == 0:
                a = px[i, 0]
            elif j == n1 - 1:
                a = -px[i, j - 1]
            else:
                a = px[i, j] - px[i, j - 1]
            if n2 == 1:
                b = 0.0
            elif i == 0:
                b = py[0, j]
            elif i == n2 - 1:
                b = -py[i - 1, j]
            else:
                b = py[i, j] - py[i - 1, j]
            out[i, j] = (a + b) * inv_h


cdef void _update(double[:, ::1] px, double[:, ::1] py, const double[:, ::1] r,
                  double inv_h, double t) noexcept nogil:
    """p <- (p + t grad r) / (1 + t |grad r|) in place."""
    cdef Py_ssize_t n2 = r.shape[0], n1 = r.shape[1], i, j
    cdef double gx, gy, den
    for i in range(n2):
        for j in range(n1):
            gx = (r[i, j + 1] - r[i, j]) * inv_h if j < n1 - 1 else 0.0
            gy = (r[i + 1, j] - r[i, j]) * inv_h if i < n2 - 1 else 0.0
            den = 1.0 + t * sqrt(gx * gx + gy * gy)
            px[i, j] = (px[i, j] + t * gx) / den
            py[i, j] = (py[i, j] + t * gy) / den


cdef void _mm(const double[:, ::1] a, bint ta, const double[:, ::1] b, bint tb,
              double[:, ::1] c) noexcept nogil:
    """Row-major c = op(a) @ op(b) via column-major dgemm on the transposes."""
    cdef int m = c.shape[0], n = c.shape[1]
    cdef int k = a.shape[0] if ta else a.shape[1]
    cdef int lda = a.shape[1], ldb = b.shape[1], ldc = n
    cdef char opa = b'T' if ta else b'N'
    cdef char opb = b'T' if tb else b'N'
    cdef double one = 1.0, zero = 0.0
    dgemm(&opb, &opa, &n, &m, &k, &one, <double*>&b[0, 0], &ldb,
          <double*>&a[0, 0], &lda, &zero, &c[0, 0], &ldc)


def ir_chambolle(p, f, double h, double t, Py_ssize_t max_it, double threshold):
    """Fused Chambolle loop for min ||div p - f||^2 over |p| <= 1."""
    cdef double[:, :, ::1] pv = np.array(p, dtype=np.float64, order="C")
    cdef const double[:, ::1] fv = np.ascontiguousarray(f, dtype=np.float64)
    cdef Py_ssize_t n2 = fv.shape[0], n1 = fv.shape[1], i, j, n
    cdef double[:, ::1] r = np.empty((n2, n1))
    energies = np.empty(max_it + 1)
    cdef double[::1] ev = energies
    cdef double inv_h = 1.0 / h, h2 = h * h, D, prev = 0.0
    cdef Py_ssize_t count = 0
    with nogil:
        for n in range(max_it + 1):
            _div(pv[0], pv[1], r, inv_h)
            D = 0.0
            for i in range(n2):
                for j in range(n1):
                    r[i, j] -= fv[i, j]
                    D += r[i, j] * r[i, j]
            D *= h2
            ev[n] = D
            count = n + 1
            if not isfinite(D):
                break
            if n > 0 and fabs(sqrt(prev) - sqrt(D)) < threshold:
                break
            if n == max_it:
                break
            prev = D
            _update(pv[0], pv[1], r, inv_h, t)
    if not np.isfinite(ev[count - 1]):
        raise NumericalDivergence("dual energy is not finite")
    return np.asarray(pv), energies[:count].copy()


def tfs_chambolle(p, rhs, double h, double t, Py_ssize_t max_it, double threshold):
    """Fused Chambolle loop for min ||P multi_div p - rhs||^2, row-wise |p_k| <= 1."""
    cdef double[:, :, :, ::1] pv = np.array(p, dtype=np.float64, order="C")
    cdef const double[:, :, ::1] fv = np.ascontiguousarray(rhs, dtype=np.float64)
    cdef Py_ssize_t n2 = fv.shape[1], n1 = fv.shape[2], i, j, n
    cdef const double[:, ::1] c2 = np.ascontiguousarray(dct_matrix(n2).matrix)
    cdef const double[:, ::1] c1 = np.ascontiguousarray(dct_matrix(n1).matrix)
    cdef const double[:, ::1] inv = np.ascontiguousarray(inverse_eigenvalues((n2, n1), h))
    cdef double[:, ::1] u0 = np.empty((n2, n1))
    cdef double[:, ::1] u1 = np.empty((n2, n1))
    cdef double[:, ::1] s = np.empty((n2, n1))
    cdef double[:, ::1] tmp = np.empty((n2, n1))
    cdef double[:, ::1] phi = np.empty((n2, n1))
    energies = np.empty(max_it + 1)
    cdef double[::1] ev = energies
    cdef double inv_h = 1.0 / h, h2 = h * h, D, prev = 0.0, gx, gy
    cdef Py_ssize_t count = 0
    with nogil:
        for n in range(max_it + 1):
            _div(pv[0, 0], pv[0, 1], u0, inv_h)
            _div(pv[1, 0], pv[1, 1], u1, inv_h)
            _div(u0, u1, s, inv_h)
            _mm(s, False, c1, True, tmp)        # s C1^T
            _mm(c2, False, tmp, False, phi)     # C2 s C1^T
            for i in range(n2):
                for j in range(n1):
                    phi[i, j] *= inv[i, j]
            _mm(phi, False, c1, False, tmp)     # S C1
            _mm(c2, True, tmp, False, phi)      # C2^T S C1
            D = 0.0
            for i in range(n2):
                for j in range(n1):
                    gx = (phi[i, j + 1] - phi[i, j]) * inv_h if j < n1 - 1 else 0.0
                    gy = (phi[i + 1, j] - phi[i, j]) * inv_h if i < n2 - 1 else 0.0
                    u0[i, j] = u0[i, j] - gx - fv[0, i, j]
                    u1[i, j] = u1[i, j] - gy - fv[1, i, j]
                    D += u0[i, j] * u0[i, j] + u1[i, j] * u1[i, j]
            D *= h2
            ev[n] = D
            count = n + 1
            if not isfinite(D):
                break
            if n > 0 and fabs(sqrt(prev) - sqrt(D)) < threshold:
                break
            if n == max_it:
                break
            prev = D
            _update(pv[0, 0], pv[0, 1], u0, inv_h, t)
            _update(pv[1, 0], pv[1, 1], u1, inv_h, t)
    if not np.isfinite(ev[count - 1]):
        raise NumericalDivergence("dual energy is not finite")
    return np.asarray(pv), energies[:count].copy()


def chambolle_update(p, psi, double t):
    """(p + t psi) / (1 + t |psi|), with |.| the Euclidean norm over axis -3."""
    p = np.asarray(p, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    shape = np.broadcast_shapes(p.shape, psi.shape)
    npix = int(np.prod(shape[len(shape) - 2:]))
    cdef const double[:, :, ::1] pv = np.ascontiguousarray(np.broadcast_to(p, shape)).reshape(-1, 2, npix)
    cdef const double[:, :, ::1] sv = np.ascontiguousarray(np.broadcast_to(psi, shape)).reshape(-1, 2, npix)
    out = np.empty(shape)
    cdef double[:, :, ::1] ov = out.reshape(-1, 2, npix)
    cdef Py_ssize_t a, q
    cdef double den
    with nogil:
        for a in range(pv.shape[0]):
            for q in range(pv.shape[2]):
                den = 1.0 + t * sqrt(sv[a, 0, q] * sv[a, 0, q] + sv[a, 1, q] * sv[a, 1, q])
                ov[a, 0, q] = (pv[a, 0, q] + t * sv[a, 0, q]) / den
                ov[a, 1, q] = (pv[a, 1, q] + t * sv[a, 1, q]) / den
    return out


def weighted_update(v, psi, theta, double t):
    """(theta v + t theta psi) / (theta + t |psi|); zero wherever theta == 0."""
    v = np.asarray(v, dtype=np.float64)
    psi = np.asarray(psi, dtype=np.float64)
    shape = np.broadcast_shapes(v.shape, psi.shape)
    grid_shape = shape[len(shape) - 2:]
    cdef Py_ssize_t npix = int(np.prod(grid_shape))
    cdef const double[:, :, ::1] vv = np.ascontiguousarray(np.broadcast_to(v, shape)).reshape(-1, 2, npix)
    cdef const double[:, :, ::1] sv = np.ascontiguousarray(np.broadcast_to(psi, shape)).reshape(-1, 2, npix)
    cdef const double[::1] th = np.ascontiguousarray(np.broadcast_to(theta, grid_shape), dtype=np.float64).reshape(-1)
    out = np.empty(shape)
    cdef double[:, :, ::1] ov = out.reshape(-1, 2, npix)
    cdef Py_ssize_t a, q
    cdef double den, w
    with nogil:
        for a in range(vv.shape[0]):
            for q in range(npix):
                w = th[q]
                den = w + t * sqrt(sv[a, 0, q] * sv[a, 0, q] + sv[a, 1, q] * sv[a, 1, q])
                if w > 0 and den > 0:
                    ov[a, 0, q] = w * (vv[a, 0, q] + t * sv[a, 0, q]) / den
                    ov[a, 1, q] = w * (vv[a, 1, q] + t * sv[a, 1, q]) / den
                else:
                    ov[a, 0, q] = 0.0
                    ov[a, 1, q] = 0.0
    return out
