# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled twins of ``_kernels_py``.

Matrix products go through BLAS ``dgemm``; bias, activation and the
activation derivative are fused into single passes over the output.
Row-major arrays are handed to column-major BLAS as their transposes.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, pow
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

cdef enum:
    LINEAR = 0
    RELU = 1
    TANH = 2


def dense_forward(const double[:, ::1] x, const double[:, ::1] W,
                  const double[::1] b, int act):
    cdef int M = x.shape[0], K = x.shape[1], N = W.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((M, N))
    cdef double* h = <double*>cnp.PyArray_DATA(out)
    cdef double* row
    cdef Py_ssize_t i, j
    cdef double alpha = 1.0, beta = 0.0, v
    cdef char tr = b'N'
    if W.shape[0] != K or b.shape[0] != N:
        raise ValueError("dense_forward: shape mismatch")
    if M == 0:
        return out
    if K > 0:
        # H^T (N x M) = W^T (N x K) * X^T (K x M)
        dgemm(&tr, &tr, &N, &M, &K, &alpha, <double*>&W[0, 0], &N,
              <double*>&x[0, 0], &K, &beta, h, &N)
    else:
        out.fill(0.0)
    for i in range(M):
        row = h + i * N
        if act == RELU:
            for j in range(N):
                v = row[j] + b[j]
                # NaN passes through, like np.maximum
                row[j] = v if not (v <= 0.0) else 0.0
        else:
            for j in range(N):
                row[j] = row[j] + b[j]
    if act == TANH:
        # numpy's vectorised tanh beats a scalar libm loop by ~10x
        np.tanh(out, out=out)
    return out


def dense_backward(const double[:, ::1] x, const double[:, ::1] W,
                   const double[:, ::1] h, const double[:, ::1] gh,
                   int act, bint need_gx=True):
    cdef int M = x.shape[0], K = x.shape[1], N = W.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gz_arr = np.empty((M, N))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gW_arr = np.empty((K, N))
    cdef cnp.ndarray[cnp.float64_t, ndim=1] gb_arr = np.zeros(N)
    cdef double* gz = <double*>cnp.PyArray_DATA(gz_arr)
    cdef double* gb = <double*>cnp.PyArray_DATA(gb_arr)
    cdef const double* hp
    cdef const double* gp
    cdef double* zr
    cdef cnp.ndarray[cnp.float64_t, ndim=2] gx_arr
    cdef Py_ssize_t i, j
    cdef double alpha = 1.0, beta = 0.0, hv, gv
    cdef char nn = b'N', tt = b'T'
    if h.shape[0] != M or h.shape[1] != N or gh.shape[0] != M or gh.shape[1] != N:
        raise ValueError("dense_backward: shape mismatch")
    for i in range(M):
        hp = &h[i, 0]
        gp = &gh[i, 0]
        zr = gz + i * N
        if act == RELU:
            for j in range(N):
                # unconditional loads let gcc emit a blend instead of a branch
                gv = gp[j]
                hv = hp[j]
                zr[j] = gv if hv > 0.0 else 0.0
        elif act == TANH:
            for j in range(N):
                hv = hp[j]
                zr[j] = gp[j] * (1.0 - hv * hv)
        else:
            for j in range(N):
                zr[j] = gp[j]
        for j in range(N):
            gb[j] += zr[j]
    if M > 0 and K > 0:
        # gW^T (N x K) = GZ^T (N x M) * X (M x K)
        dgemm(&nn, &tt, &N, &K, &M, &alpha, gz, &N,
              <double*>&x[0, 0], &K, &beta, <double*>cnp.PyArray_DATA(gW_arr), &N)
    else:
        gW_arr.fill(0.0)
    if not need_gx:
        return None, gW_arr, gb_arr
    gx_arr = np.empty((M, K))
    if M > 0 and K > 0:
        # GX^T (K x M) = W (K x N) * GZ^T (N x M)
        dgemm(&tt, &nn, &K, &M, &N, &alpha, <double*>&W[0, 0], &N,
              gz, &N, &beta, <double*>cnp.PyArray_DATA(gx_arr), &K)
    else:
        gx_arr.fill(0.0)
    return gx_arr, gW_arr, gb_arr


def adam_update(p_arr, g_arr, m_arr, v_arr, double lr, double beta1,
                double beta2, double eps, long t):
    cdef double[::1] p = p_arr.reshape(-1)
    cdef const double[::1] g = g_arr.reshape(-1)
    cdef double[::1] m = m_arr.reshape(-1)
    cdef double[::1] v = v_arr.reshape(-1)
    cdef Py_ssize_t i, n = p.shape[0]
    cdef double bc1 = 1.0 - pow(beta1, <double>t)
    cdef double bc2 = 1.0 - pow(beta2, <double>t)
    cdef double step = lr / bc1, sbc2 = sqrt(bc2), gi
    if g.shape[0] != n or m.shape[0] != n or v.shape[0] != n:
        raise ValueError("adam_update: shape mismatch")
    for i in range(n):
        gi = g[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * gi
        v[i] = beta2 * v[i] + (1.0 - beta2) * (gi * gi)
        p[i] = p[i] - step * m[i] / (sqrt(v[i]) / sbc2 + eps)


def polyak_update(target_arr, online_arr, double tau):
    cdef double[::1] tgt = target_arr.reshape(-1)
    cdef const double[::1] onl = online_arr.reshape(-1)
    cdef Py_ssize_t i, n = tgt.shape[0]
    cdef double keep = 1.0 - tau
    if onl.shape[0] != n:
        raise ValueError("polyak_update: shape mismatch")
    for i in range(n):
        tgt[i] = tau * onl[i] + keep * tgt[i]
