# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled dense-layer kernels: BLAS dgemm plus fused bias/activation loops.

Same API and semantics as the numpy fallback in ``_kernels_np``; selected
at import time by :mod:`emogan.kernels`.
"""

from libc.math cimport exp as c_exp

import numpy as np

from scipy.linalg.cython_blas cimport dgemm


cdef void _blas_gemm(char ta, char tb, int m, int n, int k,
                     double* a, int lda, double* b, int ldb,
                     double* c, int ldc) noexcept nogil:
    cdef double one = 1.0
    cdef double zero = 0.0
    dgemm(&ta, &tb, &m, &n, &k, &one, a, &lda, b, &ldb, &zero, c, &ldc)


cdef void _matmul_nn(double[:, ::1] a, double[:, ::1] b, double[:, ::1] c) noexcept nogil:
    # c (m,n) = a (m,k) @ b (k,n), all row-major: compute c^T = b^T a^T in
    # column-major BLAS terms.
    cdef int m = a.shape[0], k = a.shape[1], n = b.shape[1]
    if m == 0 or n == 0 or k == 0:
        return
    _blas_gemm(b'N', b'N', n, m, k, &b[0, 0], n, &a[0, 0], k, &c[0, 0], n)


cdef void _matmul_nt(double[:, ::1] dpre, double[:, ::1] w, double[:, ::1] dx) noexcept nogil:
    # dx (m,k) = dpre (m,n) @ w^T, w stored (k,n) row-major
    cdef int m = dpre.shape[0], n = dpre.shape[1], k = w.shape[0]
    if m == 0 or n == 0 or k == 0:
        return
    _blas_gemm(b'T', b'N', k, m, n, &w[0, 0], n, &dpre[0, 0], n, &dx[0, 0], k)


cdef void _matmul_tn(double[:, ::1] x, double[:, ::1] dpre, double[:, ::1] dw) noexcept nogil:
    # dw (k,n) = x^T @ dpre, x stored (m,k) row-major
    cdef int m = x.shape[0], k = x.shape[1], n = dpre.shape[1]
    if m == 0 or n == 0 or k == 0:
        return
    _blas_gemm(b'N', b'T', n, k, m, &dpre[0, 0], n, &x[0, 0], k, &dw[0, 0], n)


def affine_forward(double[:, ::1] x, double[:, ::1] w, double[::1] b, int act):
    """act(x @ w + b); act codes: 0 linear, 1 relu, 2 sigmoid, 3 softmax."""
    cdef Py_ssize_t m = x.shape[0], n = w.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double v, row_max, row_sum
    if act < 0 or act > 3:
        raise ValueError(f"unknown activation code {act}")
    with nogil:
        _matmul_nn(x, w, out)
        for i in range(m):
            for j in range(n):
                out[i, j] += b[j]
        if act == 1:
            for i in range(m):
                for j in range(n):
                    if out[i, j] < 0.0:
                        out[i, j] = 0.0
        elif act == 2:
            for i in range(m):
                for j in range(n):
                    out[i, j] = 1.0 / (1.0 + c_exp(-out[i, j]))
        elif act == 3:
            for i in range(m):
                row_max = out[i, 0]
                for j in range(1, n):
                    if out[i, j] > row_max:
                        row_max = out[i, j]
                row_sum = 0.0
                for j in range(n):
                    v = c_exp(out[i, j] - row_max)
                    out[i, j] = v
                    row_sum += v
                for j in range(n):
                    out[i, j] /= row_sum
    return out_arr


def affine_backward(double[:, ::1] dout, double[:, ::1] x, double[:, ::1] w,
                    double[:, ::1] out, int act):
    """Gradients of act(x @ w + b): returns (dx, dw, db)."""
    cdef Py_ssize_t m = dout.shape[0], n = dout.shape[1], k = x.shape[1]
    dpre_arr = np.empty((m, n), dtype=np.float64)
    dx_arr = np.empty((m, k), dtype=np.float64)
    dw_arr = np.empty((k, n), dtype=np.float64)
    db_arr = np.zeros(n, dtype=np.float64)
    cdef double[:, ::1] dpre = dpre_arr
    cdef double[:, ::1] dx = dx_arr
    cdef double[:, ::1] dw = dw_arr
    cdef double[::1] db = db_arr
    cdef Py_ssize_t i, j
    cdef double dot
    if act < 0 or act > 3:
        raise ValueError(f"unknown activation code {act}")
    with nogil:
        if act == 0:
            for i in range(m):
                for j in range(n):
                    dpre[i, j] = dout[i, j]
        elif act == 1:
            for i in range(m):
                for j in range(n):
                    dpre[i, j] = dout[i, j] if out[i, j] > 0.0 else 0.0
        elif act == 2:
            for i in range(m):
                for j in range(n):
                    dpre[i, j] = dout[i, j] * out[i, j] * (1.0 - out[i, j])
        else:
            for i in range(m):
                dot = 0.0
                for j in range(n):
                    dot += dout[i, j] * out[i, j]
                for j in range(n):
                    dpre[i, j] = out[i, j] * (dout[i, j] - dot)
        for i in range(m):
            for j in range(n):
                db[j] += dpre[i, j]
        _matmul_tn(x, dpre, dw)
        _matmul_nt(dpre, w, dx)
    return dx_arr, dw_arr, db_arr


def sgd_update(double[::1] param, double[::1] vel, double[::1] grad,
               double lr, double momentum):
    """In-place classical-momentum step on flat float64 views."""
    cdef Py_ssize_t i, n = param.shape[0]
    with nogil:
        for i in range(n):
            vel[i] = momentum * vel[i] - lr * grad[i]
            param[i] += vel[i]
