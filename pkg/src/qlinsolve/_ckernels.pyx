# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled inner loops. Signatures mirror ``qlinsolve._pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, cos, sin

cnp.import_array()


def apply_1q(double complex[:, ::1] psi, int n_qubits, int target,
             double complex[:, ::1] u):
    cdef Py_ssize_t dim = psi.shape[0]
    cdef Py_ssize_t nb = psi.shape[1]
    cdef Py_ssize_t tbit = (<Py_ssize_t>1) << (n_qubits - 1 - target)
    # real arithmetic avoids the C99 complex multiply with its inf/nan branches
    cdef double ar = u[0, 0].real, ai = u[0, 0].imag, br = u[0, 1].real, bi = u[0, 1].imag
    cdef double cr = u[1, 0].real, ci = u[1, 0].imag, dr = u[1, 1].real, di = u[1, 1].imag
    cdef double xr, xi, yr, yi
    cdef double complex *base = &psi[0, 0]
    cdef double *p
    cdef double *q
    cdef Py_ssize_t blk, off, k, stride = tbit * nb
    for blk in range(0, dim, 2 * tbit):
        p = <double *>(base + blk * nb)
        q = <double *>(base + blk * nb + stride)
        for k in range(stride):
            off = 2 * k
            xr = p[off]
            xi = p[off + 1]
            yr = q[off]
            yi = q[off + 1]
            p[off] = ar * xr - ai * xi + br * yr - bi * yi
            p[off + 1] = ar * xi + ai * xr + br * yi + bi * yr
            q[off] = cr * xr - ci * xi + dr * yr - di * yi
            q[off + 1] = cr * xi + ci * xr + dr * yi + di * yr


def apply_mcx(double complex[:, ::1] psi, Py_ssize_t ctrl_mask,
              Py_ssize_t ctrl_value, Py_ssize_t tbit):
    cdef Py_ssize_t dim = psi.shape[0]
    cdef Py_ssize_t nb = psi.shape[1]
    cdef double complex tmp
    cdef Py_ssize_t i, j, b
    for i in range(dim):
        if i & tbit:
            continue
        if (i & ctrl_mask) != ctrl_value:
            continue
        j = i | tbit
        for b in range(nb):
            tmp = psi[i, b]
            psi[i, b] = psi[j, b]
            psi[j, b] = tmp


def jacobi_sweep(double complex[:, ::1] g, double complex[:, ::1] v, double tol, double floor=0.0):
    """One cyclic one-sided Jacobi sweep. Rows of ``g``/``v`` are matrix columns.

    Pairs where either squared column norm is at most ``floor`` are skipped.
    """
    cdef Py_ssize_t n = g.shape[0]
    cdef Py_ssize_t m = g.shape[1]
    cdef Py_ssize_t nv = v.shape[1]
    cdef Py_ssize_t p, q, k
    cdef double alpha, beta, agam, zeta, t, c, s
    cdef double complex gam, ph, x, y
    cdef int rotations = 0
    for p in range(n - 1):
        for q in range(p + 1, n):
            alpha = 0.0
            beta = 0.0
            gam = 0.0
            for k in range(m):
                x = g[p, k]
                y = g[q, k]
                alpha += x.real * x.real + x.imag * x.imag
                beta += y.real * y.real + y.imag * y.imag
                gam += x.conjugate() * y
            agam = sqrt(gam.real * gam.real + gam.imag * gam.imag)
            if agam == 0.0 or alpha <= floor or beta <= floor or agam <= tol * sqrt(alpha * beta):
                continue
            rotations += 1
            ph = gam / agam
            zeta = (beta - alpha) / (2.0 * agam)
            if zeta >= 0:
                t = 1.0 / (zeta + sqrt(1.0 + zeta * zeta))
            else:
                t = -1.0 / (-zeta + sqrt(1.0 + zeta * zeta))
            c = 1.0 / sqrt(1.0 + t * t)
            s = c * t
            for k in range(m):
                x = g[p, k]
                y = g[q, k] * ph.conjugate()
                g[p, k] = c * x - s * y
                g[q, k] = (s * x + c * y) * ph
            for k in range(nv):
                x = v[p, k]
                y = v[q, k] * ph.conjugate()
                v[p, k] = c * x - s * y
                v[q, k] = (s * x + c * y) * ph
    return rotations


def qsp_response(double[::1] phases, double complex[:, :, ::1] signal, bint jacobian):
    """<0|e^{i p0 Z} W e^{i p1 Z} ... W e^{i pd Z}|0> per signal matrix W.

    Returns the complex values and, if requested, d<0|U|0>/dp_k as a
    complex (n_points, d + 1) array.
    """
    cdef Py_ssize_t npt = signal.shape[0]
    cdef Py_ssize_t nph = phases.shape[0]
    cdef Py_ssize_t d = nph - 1
    cdef Py_ssize_t j, k
    values = np.empty(npt, dtype=np.complex128)
    cdef double complex[::1] vals = values
    jac_arr = np.zeros((npt, nph if jacobian else 1), dtype=np.complex128)
    cdef double complex[:, ::1] jac = jac_arr
    left_arr = np.empty((nph, 2), dtype=np.complex128)
    right_arr = np.empty((nph, 2), dtype=np.complex128)
    cdef double complex[:, ::1] left = left_arr
    cdef double complex[:, ::1] right = right_arr
    ephase_arr = np.empty(nph, dtype=np.complex128)
    cdef double complex[::1] eph = ephase_arr
    cdef double complex w00, w01, w10, w11, l0, l1, r0, r1, e
    for k in range(nph):
        eph[k] = cos(phases[k]) + 1j * sin(phases[k])
    for j in range(npt):
        w00 = signal[j, 0, 0]
        w01 = signal[j, 0, 1]
        w10 = signal[j, 1, 0]
        w11 = signal[j, 1, 1]
        # row vectors <0| S0 W S1 W ... (up to, excluding, S_k)
        l0 = 1.0
        l1 = 0.0
        for k in range(nph):
            left[k, 0] = l0
            left[k, 1] = l1
            if k == d:
                break
            e = eph[k]
            l0 = l0 * e
            l1 = l1 * e.conjugate()
            l0, l1 = l0 * w00 + l1 * w10, l0 * w01 + l1 * w11
        # column vectors S_k W ... S_d |0>
        r0 = eph[d]
        r1 = 0.0
        right[d, 0] = r0
        right[d, 1] = r1
        k = d - 1
        while k >= 0:
            r0, r1 = w00 * r0 + w01 * r1, w10 * r0 + w11 * r1
            e = eph[k]
            r0 = r0 * e
            r1 = r1 * e.conjugate()
            right[k, 0] = r0
            right[k, 1] = r1
            k -= 1
        vals[j] = left[0, 0] * right[0, 0] + left[0, 1] * right[0, 1]
        if jacobian:
            for k in range(nph):
                jac[j, k] = 1j * (left[k, 0] * right[k, 0] - left[k, 1] * right[k, 1])
    if jacobian:
        return values, jac_arr
    return values, None
