"""Pure numpy versions of the hot kernels.

Same signatures and in-place semantics as the compiled ``_ckernels``
module; used when the extension is not built or when
``QLINSOLVE_PURE_PYTHON`` is set.
"""
from functools import lru_cache

import numpy as np


def apply_1q(psi, n_qubits, target, u):
    dim, nb = psi.shape
    hi = 1 << target
    lo = dim >> (target + 1)
    view = psi.reshape(hi, 2, lo, nb)
    view[...] = np.einsum("ab,hblk->halk", u, view)


@lru_cache(maxsize=512)
def _mcx_pairs(dim, ctrl_mask, ctrl_value, tbit):
    idx = np.arange(dim)
    sel = idx[((idx & ctrl_mask) == ctrl_value) & ((idx & tbit) == 0)]
    return sel, sel | tbit


def apply_mcx(psi, ctrl_mask, ctrl_value, tbit):
    lo, hi = _mcx_pairs(psi.shape[0], ctrl_mask, ctrl_value, tbit)
    if lo.size:
        psi[np.concatenate([lo, hi])] = psi[np.concatenate([hi, lo])]


def jacobi_sweep(g, v, tol, floor=0.0):
    n = g.shape[0]
    rotations = 0
    for p in range(n - 1):
        for q in range(p + 1, n):
            x, y = g[p], g[q]
            alpha = np.vdot(x, x).real
            beta = np.vdot(y, y).real
            gam = np.vdot(x, y)
            agam = abs(gam)
            if agam == 0.0 or alpha <= floor or beta <= floor or agam <= tol * np.sqrt(alpha * beta):
                continue
            rotations += 1
            ph = gam / agam
            zeta = (beta - alpha) / (2.0 * agam)
            t = np.copysign(1.0, zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
            c = 1.0 / np.sqrt(1.0 + t * t)
            s = c * t
            for arr in (g, v):
                xp = arr[p].copy()
                yq = arr[q] * np.conj(ph)
                arr[p] = c * xp - s * yq
                arr[q] = (s * xp + c * yq) * ph
    return rotations


def qsp_response(phases, signal, jacobian):
    phases = np.asarray(phases, dtype=float)
    nph = phases.size
    d = nph - 1
    npt = signal.shape[0]
    eph = np.exp(1j * phases)
    left = np.empty((nph, npt, 2), dtype=complex)
    right = np.empty((nph, npt, 2), dtype=complex)
    row = np.zeros((npt, 2), dtype=complex)
    row[:, 0] = 1.0
    for k in range(nph):
        left[k] = row
        if k == d:
            break
        row = row * np.array([eph[k], np.conj(eph[k])])
        row = np.einsum("ja,jab->jb", row, signal)
    col = np.zeros((npt, 2), dtype=complex)
    col[:, 0] = eph[d]
    right[d] = col
    for k in range(d - 1, -1, -1):
        col = np.einsum("jab,jb->ja", signal, col)
        col = col * np.array([eph[k], np.conj(eph[k])])
        right[k] = col
    values = left[0, :, 0] * right[0, :, 0] + left[0, :, 1] * right[0, :, 1]
    if not jacobian:
        return values, None
    jac = 1j * (left[:, :, 0] * right[:, :, 0] - left[:, :, 1] * right[:, :, 1])
    return values, np.ascontiguousarray(jac.T)
