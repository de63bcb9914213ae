"""Pure-Python coordinate-descent kernel.

Used when the compiled ``sparsecc._core`` is unavailable, and as the
reference the compiled kernel is tested against.
"""
import numpy as np


def cd_solve(Z, w, grad, grad0, coef, u, lam, max_sweeps, tol):
    """Cyclic coordinate descent on the weighted quadratic model of the loss.

    Minimizes, over an intercept step ``dd`` and coefficients ``b``::

        grad0*dd + grad'(b - b0) + 1/(2N) sum_i w_i (dd + z_i'(b - b0))^2 + lam*|b|_1

    where ``b0`` is the value of ``coef`` on entry.

    Parameters
    ----------
    Z : ndarray, shape (N, M), Fortran order
    w : ndarray, shape (N,)
        Nonnegative curvature weights p(1-p).
    grad, grad0 : gradient of the smooth loss at ``b0`` (coefficients, intercept).
    coef : ndarray, shape (M,)
        Updated in place to the subproblem minimizer.
    u : ndarray, shape (N,)
        Must be zero on entry; holds ``dd + Z(b - b0)`` on exit.
    lam : float
        L1 weight. Coordinates with ``|partial| == lam`` stay at zero.
    max_sweeps : int
    tol : float
        Stop after a full sweep whose largest ``curv_j * |step_j|`` is below ``tol``.

    Returns
    -------
    (dd, sweeps)
    """
    N, M = Z.shape
    inv_n = 1.0 / N
    wz = w[:, None] * Z
    curv = np.einsum("ij,ij->j", wz, Z) * inv_n
    a0 = w.sum() * inv_n
    ddelta = 0.0
    sweeps = 0
    full = True
    while sweeps < max_sweeps:
        sweeps += 1
        change = 0.0

        step = -(grad0 + np.dot(w, u) * inv_n) / a0
        if step != 0.0:
            u += step
            ddelta += step
            change = max(change, a0 * abs(step))

        for j in range(M):
            old = coef[j]
            if not full and old == 0.0:
                continue
            cj = curv[j]
            if cj <= 0.0:
                continue
            c = grad[j] + np.dot(wz[:, j], u) * inv_n
            z = cj * old - c
            if z > lam:
                new = (z - lam) / cj
            elif z < -lam:
                new = (z + lam) / cj
            else:
                new = 0.0
            diff = new - old
            if diff != 0.0:
                coef[j] = new
                u += diff * Z[:, j]
                change = max(change, cj * abs(diff))

        if change < tol:
            if full:
                break
            full = True
        else:
            full = False
    return ddelta, sweeps
