# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the kernels in ``_pykernels``.

Loops run ``k`` outermost and ``i`` innermost so the Fortran-ordered fields
are walked contiguously. The outer ``k`` loop is split across OpenMP threads;
every thread writes disjoint nodes and only reads the previous-step input.
"""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport fabs, floor

cnp.import_array()

NAME = "cython"


cdef inline int _nthreads(int threads) noexcept nogil:
    return threads if threads > 0 else 1


def stencil_matvec(double[:, :, :] u, double coupling, double[:, :, :] out, int threads=0):
    cdef Py_ssize_t L = u.shape[0], M = u.shape[1], N = u.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double c, acc
    for k in prange(N, nogil=True, schedule="static", num_threads=_nthreads(threads)):
        for j in range(M):
            for i in range(L):
                c = u[i, j, k]
                acc = 0.0
                if i > 0:
                    acc = acc + (c - u[i - 1, j, k])
                if i < L - 1:
                    acc = acc + (c - u[i + 1, j, k])
                if j > 0:
                    acc = acc + (c - u[i, j - 1, k])
                if j < M - 1:
                    acc = acc + (c - u[i, j + 1, k])
                if k > 0:
                    acc = acc + (c - u[i, j, k - 1])
                if k < N - 1:
                    acc = acc + (c - u[i, j, k + 1])
                out[i, j, k] = c + coupling * acc
    return np.asarray(out)


def velocity(double[:, :, :] rho, double h, double[:, :, :, :] out, int threads=0):
    cdef Py_ssize_t L = rho.shape[0], M = rho.shape[1], N = rho.shape[2]
    cdef Py_ssize_t i, j, k
    cdef double d
    for k in prange(N, nogil=True, schedule="static", num_threads=_nthreads(threads)):
        for j in range(M):
            for i in range(L):
                d = 2.0 * h * rho[i, j, k]
                if 0 < i < L - 1:
                    out[0, i, j, k] = -(rho[i + 1, j, k] - rho[i - 1, j, k]) / d
                else:
                    out[0, i, j, k] = 0.0
                if 0 < j < M - 1:
                    out[1, i, j, k] = -(rho[i, j + 1, k] - rho[i, j - 1, k]) / d
                else:
                    out[1, i, j, k] = 0.0
                if 0 < k < N - 1:
                    out[2, i, j, k] = -(rho[i, j, k + 1] - rho[i, j, k - 1]) / d
                else:
                    out[2, i, j, k] = 0.0
    return np.asarray(out)


cdef inline double _upwind_term(double vel, double x0, double xm1, double xm2,
                                double xp1, double xp2, Py_ssize_t idx,
                                Py_ssize_t n, double h) noexcept nogil:
    # one-sided derivative times velocity; faces contribute nothing
    if idx == 0 or idx == n - 1:
        return 0.0
    if idx == 1 or idx == n - 2:
        if vel > 0:
            return vel * ((x0 - xm1) / h)
        return vel * ((xp1 - x0) / h)
    if vel > 0:
        return vel * ((3.0 * x0 - 4.0 * xm1 + xm2) / (2.0 * h))
    return vel * ((-xp2 + 4.0 * xp1 - 3.0 * x0) / (2.0 * h))


cdef inline double _centre_weight(Py_ssize_t idx, Py_ssize_t n, double h) noexcept nogil:
    if idx == 0 or idx == n - 1:
        return 0.0
    if idx == 1 or idx == n - 2:
        return 1.0 / h
    return 1.5 / h


def upwind_step(double[:, :, :, :] xi, double[:, :, :, :] v, double dt, double h,
                double[:, :, :, :] out, int threads=0):
    cdef Py_ssize_t L = xi.shape[1], M = xi.shape[2], N = xi.shape[3]
    cdef Py_ssize_t i, j, k, c
    cdef Py_ssize_t im1, im2, ip1, ip2, jm1, jm2, jp1, jp2, km1, km2, kp1, kp2
    cdef double vx, vy, vz, rate
    coef_arr = np.empty((L, M, N), order="F")
    cdef double[:, :, :] coef = coef_arr
    for k in prange(N, nogil=True, schedule="static", num_threads=_nthreads(threads)):
        km1 = k - 1 if k >= 1 else 0
        km2 = k - 2 if k >= 2 else 0
        kp1 = k + 1 if k + 1 < N else N - 1
        kp2 = k + 2 if k + 2 < N else N - 1
        for j in range(M):
            jm1 = j - 1 if j >= 1 else 0
            jm2 = j - 2 if j >= 2 else 0
            jp1 = j + 1 if j + 1 < M else M - 1
            jp2 = j + 2 if j + 2 < M else M - 1
            for i in range(L):
                im1 = i - 1 if i >= 1 else 0
                im2 = i - 2 if i >= 2 else 0
                ip1 = i + 1 if i + 1 < L else L - 1
                ip2 = i + 2 if i + 2 < L else L - 1
                vx = v[0, i, j, k]
                vy = v[1, i, j, k]
                vz = v[2, i, j, k]
                for c in range(3):
                    rate = (
                        _upwind_term(vx, xi[c, i, j, k], xi[c, im1, j, k], xi[c, im2, j, k],
                                     xi[c, ip1, j, k], xi[c, ip2, j, k], i, L, h)
                        + _upwind_term(vy, xi[c, i, j, k], xi[c, i, jm1, k], xi[c, i, jm2, k],
                                       xi[c, i, jp1, k], xi[c, i, jp2, k], j, M, h)
                        + _upwind_term(vz, xi[c, i, j, k], xi[c, i, j, km1], xi[c, i, j, km2],
                                       xi[c, i, j, kp1], xi[c, i, j, kp2], k, N, h)
                    )
                    out[c, i, j, k] = xi[c, i, j, k] - dt * rate
                coef[i, j, k] = 1.0 - dt * (
                    _centre_weight(i, L, h) * fabs(vx)
                    + _centre_weight(j, M, h) * fabs(vy)
                    + _centre_weight(k, N, h) * fabs(vz)
                )
    flat = coef_arr.ravel(order="F")
    arg = int(np.argmin(flat))
    return float(flat[arg]), float(flat.max()), arg


def locate(double[:, :] points, double[:, :] tet_origin, double[:, :, :] tet_inverse,
           hash_lo, double hash_size, hash_dims,
           long long[:] cell_start, long long[:] cell_tets, double tol):
    cdef Py_ssize_t npts = points.shape[0]
    cdef Py_ssize_t p, q, t
    cdef long long nx = hash_dims[0], ny = hash_dims[1], nz = hash_dims[2]
    cdef double lox = hash_lo[0], loy = hash_lo[1], loz = hash_lo[2]
    cdef long long cx, cy, cz, cell
    cdef double rx, ry, rz, l1, l2, l3, l0
    tet_id_arr = np.full(npts, -1, dtype=np.int64)
    bary_arr = np.zeros((npts, 4))
    cdef long long[:] tet_id = tet_id_arr
    cdef double[:, :] bary = bary_arr
    with nogil:
        for p in range(npts):
            cx = <long long>floor((points[p, 0] - lox) / hash_size)
            cy = <long long>floor((points[p, 1] - loy) / hash_size)
            cz = <long long>floor((points[p, 2] - loz) / hash_size)
            if cx < 0 or cy < 0 or cz < 0 or cx >= nx or cy >= ny or cz >= nz:
                continue
            cell = cx + nx * (cy + ny * cz)
            for q in range(cell_start[cell], cell_start[cell + 1]):
                t = cell_tets[q]
                rx = points[p, 0] - tet_origin[t, 0]
                ry = points[p, 1] - tet_origin[t, 1]
                rz = points[p, 2] - tet_origin[t, 2]
                l1 = tet_inverse[t, 0, 0] * rx + tet_inverse[t, 0, 1] * ry + tet_inverse[t, 0, 2] * rz
                l2 = tet_inverse[t, 1, 0] * rx + tet_inverse[t, 1, 1] * ry + tet_inverse[t, 1, 2] * rz
                l3 = tet_inverse[t, 2, 0] * rx + tet_inverse[t, 2, 1] * ry + tet_inverse[t, 2, 2] * rz
                l0 = 1.0 - (l1 + l2 + l3)
                if l0 >= -tol and l1 >= -tol and l2 >= -tol and l3 >= -tol:
                    tet_id[p] = t
                    bary[p, 0] = l0
                    bary[p, 1] = l1
                    bary[p, 2] = l2
                    bary[p, 3] = l3
                    break
    return tet_id_arr, bary_arr
