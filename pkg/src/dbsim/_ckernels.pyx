# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled bulk channel kernels; see ``_pykernels`` for the reference semantics."""
import numpy as np
cimport numpy as cnp
from libc.math cimport atan2, exp, log, log2, sqrt, M_PI

cnp.import_array()


cdef struct Params:
    double h2, h, alpha, beta, lin_los, hg_los, lin_nlos, hg_nlos, kappa2, noise


cdef inline Params _unpack(params):
    cdef Params p
    p.h2, p.h, p.alpha, p.beta, p.lin_los, p.hg_los, p.lin_nlos, p.hg_nlos, p.kappa2, p.noise = params
    return p


cdef inline void _terms(double r2, const Params* p, double* pl, double* sl, double* sn) noexcept nogil:
    cdef double omega = atan2(p.h, sqrt(r2)) * (180.0 / M_PI)
    cdef double d2 = r2 + p.h2
    cdef double ln_d2
    if d2 < 1.0:
        d2 = 1.0
    ln_d2 = log(d2)
    pl[0] = 1.0 / (1.0 + p.alpha * exp(-p.beta * (omega - p.alpha)))
    sl[0] = p.lin_los * exp(-p.hg_los * ln_d2)
    sn[0] = p.lin_nlos * exp(-p.hg_nlos * ln_d2)


cdef inline double _expected(double r2, const Params* p) noexcept nogil:
    cdef double pl, sl, sn
    _terms(r2, p, &pl, &sl, &sn)
    return pl * sl + (1.0 - pl) * sn


def link_terms(r2, params):
    cdef Params p = _unpack(params)
    arr = np.ascontiguousarray(r2, dtype=np.float64)
    shape = arr.shape
    cdef const double[::1] flat = arr.reshape(-1)
    cdef Py_ssize_t n = flat.shape[0], i
    pl_a = np.empty(n)
    sl_a = np.empty(n)
    sn_a = np.empty(n)
    cdef double[::1] pl = pl_a, sl = sl_a, sn = sn_a
    with nogil:
        for i in range(n):
            _terms(flat[i], &p, &pl[i], &sl[i], &sn[i])
    return pl_a.reshape(shape), sl_a.reshape(shape), sn_a.reshape(shape)


def expected_power(r2, params):
    cdef Params p = _unpack(params)
    arr = np.ascontiguousarray(r2, dtype=np.float64)
    shape = arr.shape
    cdef const double[::1] flat = arr.reshape(-1)
    cdef Py_ssize_t n = flat.shape[0], i
    out_a = np.empty(n)
    cdef double[::1] out = out_a
    with nogil:
        for i in range(n):
            out[i] = _expected(flat[i], &p)
    return out_a.reshape(shape)


def interference(ux, uy, userv, dx, dy, dtx, params):
    cdef Params p = _unpack(params)
    cdef const double[::1] vux = np.ascontiguousarray(ux, dtype=np.float64)
    cdef const double[::1] vuy = np.ascontiguousarray(uy, dtype=np.float64)
    cdef const long[::1] vserv = np.ascontiguousarray(userv, dtype=np.int_)
    cdef const double[:, ::1] vdx = np.ascontiguousarray(np.atleast_2d(dx), dtype=np.float64)
    cdef const double[:, ::1] vdy = np.ascontiguousarray(np.atleast_2d(dy), dtype=np.float64)
    cdef const unsigned char[::1] vtx = np.ascontiguousarray(dtx, dtype=np.uint8)
    cdef Py_ssize_t K = vdx.shape[0], N = vdx.shape[1], M = vux.shape[0]
    cdef Py_ssize_t k, m, j
    cdef double acc, ex, ey, r2
    out_a = np.zeros((K, M))
    cdef double[:, ::1] out = out_a
    with nogil:
        for k in range(K):
            for m in range(M):
                acc = 0.0
                for j in range(N):
                    if not vtx[j] or j == vserv[m]:
                        continue
                    ex = vux[m] - vdx[k, j]
                    ey = vuy[m] - vdy[k, j]
                    r2 = ex * ex + ey * ey
                    if r2 <= p.kappa2:
                        acc = acc + _expected(r2, &p)
                out[k, m] = acc
    return out_a


def leakage(cx, cy, rowid, ux, uy, ucell, nbr, params):
    cdef Params p = _unpack(params)
    cdef const double[:, ::1] vcx = np.ascontiguousarray(cx, dtype=np.float64)
    cdef const double[:, ::1] vcy = np.ascontiguousarray(cy, dtype=np.float64)
    cdef const long[::1] vrow = np.ascontiguousarray(rowid, dtype=np.int_)
    cdef const double[::1] vux = np.ascontiguousarray(ux, dtype=np.float64)
    cdef const double[::1] vuy = np.ascontiguousarray(uy, dtype=np.float64)
    cdef const long[::1] vcell = np.ascontiguousarray(ucell, dtype=np.int_)
    cdef const unsigned char[:, ::1] vnbr = np.ascontiguousarray(nbr, dtype=np.uint8)
    cdef Py_ssize_t N = vcx.shape[0], S = vcx.shape[1], M = vux.shape[0]
    cdef Py_ssize_t r, n, s, m
    cdef double acc, ex, ey
    out_a = np.zeros((N, S))
    cdef double[:, ::1] out = out_a
    with nogil:
        for r in range(N):
            n = vrow[r]
            for s in range(S):
                acc = 0.0
                for m in range(M):
                    if vcell[m] == n or not vnbr[n, vcell[m]]:
                        continue
                    ex = vcx[r, s] - vux[m]
                    ey = vcy[r, s] - vuy[m]
                    acc = acc + _expected(ex * ex + ey * ey, &p)
                out[r, s] = acc
    return out_a


def user_se(p_los, s_los, s_nlos, interf, noise):
    a_p, a_l, a_n, a_i = np.broadcast_arrays(
        np.asarray(p_los, dtype=np.float64), np.asarray(s_los, dtype=np.float64),
        np.asarray(s_nlos, dtype=np.float64), np.asarray(interf, dtype=np.float64))
    shape = a_p.shape
    cdef const double[::1] vp = np.ascontiguousarray(a_p).reshape(-1)
    cdef const double[::1] vl = np.ascontiguousarray(a_l).reshape(-1)
    cdef const double[::1] vn = np.ascontiguousarray(a_n).reshape(-1)
    cdef const double[::1] vi = np.ascontiguousarray(a_i).reshape(-1)
    cdef Py_ssize_t n = vp.shape[0], i
    cdef double nz = noise, den
    out_a = np.empty(n)
    cdef double[::1] out = out_a
    with nogil:
        for i in range(n):
            den = vi[i] + nz
            out[i] = vp[i] * log2(1.0 + vl[i] / den) + (1.0 - vp[i]) * log2(1.0 + vn[i] / den)
    return out_a.reshape(shape)
