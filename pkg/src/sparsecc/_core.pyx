# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled coordinate-descent kernel.

Mirrors :mod:`sparsecc._fallback` exactly; see there for the contract.
"""
import numpy as np

from libc.math cimport fabs


cdef inline double _soft(double z, double t) noexcept nogil:
    if z > t:
        return z - t
    if z < -t:
        return z + t
    return 0.0


def cd_solve(const double[::1, :] Z, const double[::1] w, const double[::1] grad,
             double grad0, double[::1] coef, double[::1] u, double lam,
             int max_sweeps, double tol):
    cdef Py_ssize_t N = Z.shape[0]
    cdef Py_ssize_t M = Z.shape[1]
    cdef Py_ssize_t i, j
    cdef double inv_n = 1.0 / N
    cdef double[::1] curv = np.empty(M, dtype=np.float64)
    cdef double a0 = 0.0, s, c, old, new, diff, change, step, zij
    cdef double ddelta = 0.0
    cdef int sweeps = 0
    cdef bint full = True

    with nogil:
        for i in range(N):
            a0 += w[i]
        a0 *= inv_n
        for j in range(M):
            s = 0.0
            for i in range(N):
                zij = Z[i, j]
                s += w[i] * zij * zij
            curv[j] = s * inv_n

        while sweeps < max_sweeps:
            sweeps += 1
            change = 0.0

            s = 0.0
            for i in range(N):
                s += w[i] * u[i]
            step = -(grad0 + s * inv_n) / a0
            if step != 0.0:
                for i in range(N):
                    u[i] += step
                ddelta += step
                if a0 * fabs(step) > change:
                    change = a0 * fabs(step)

            for j in range(M):
                old = coef[j]
                if not full and old == 0.0:
                    continue
                if curv[j] <= 0.0:
                    continue
                s = 0.0
                for i in range(N):
                    s += w[i] * Z[i, j] * u[i]
                c = grad[j] + s * inv_n
                new = _soft(curv[j] * old - c, lam) / curv[j]
                diff = new - old
                if diff != 0.0:
                    coef[j] = new
                    for i in range(N):
                        u[i] += diff * Z[i, j]
                    if curv[j] * fabs(diff) > change:
                        change = curv[j] * fabs(diff)

            if change < tol:
                if full:
                    break
                full = True
            else:
                full = False

    return ddelta, sweeps
