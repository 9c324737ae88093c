"""Time-stepping kernels for ``psi' = -i H psi`` with ``H`` in CSR form.

Each public kernel has a numba implementation and a numpy/scipy fallback;
``USE_NUMBA`` picks one at import time.
"""
import numpy as np
import scipy.sparse as sp

from ._accel import USE_NUMBA, numba


def _csr_matvec_py(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for row in range(n):
        acc = 0j
        for p in range(indptr[row], indptr[row + 1]):
            acc += data[p] * x[indices[p]]
        out[row] = acc


def _rk4_steps_py(indptr, indices, data, psi, dt, nsteps, k1, k2, k3, k4, tmp):
    n = psi.shape[0]
    half = 0.5 * dt
    for _ in range(nsteps):
        _csr_matvec(indptr, indices, data, psi, k1)
        for i in range(n):
            k1[i] = -1j * k1[i]
            tmp[i] = psi[i] + half * k1[i]
        _csr_matvec(indptr, indices, data, tmp, k2)
        for i in range(n):
            k2[i] = -1j * k2[i]
            tmp[i] = psi[i] + half * k2[i]
        _csr_matvec(indptr, indices, data, tmp, k3)
        for i in range(n):
            k3[i] = -1j * k3[i]
            tmp[i] = psi[i] + dt * k3[i]
        _csr_matvec(indptr, indices, data, tmp, k4)
        for i in range(n):
            psi[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] - 1j * k4[i])


def _chebyshev_sum_py(indptr, indices, data, psi, coeffs, out, t0, t1, t2):
    # data holds the rescaled operator with spectrum inside [-1, 1]
    n = psi.shape[0]
    for i in range(n):
        t0[i] = psi[i]
        out[i] = coeffs[0] * psi[i]
    _csr_matvec(indptr, indices, data, psi, t1)
    for i in range(n):
        out[i] += coeffs[1] * t1[i]
    for k in range(2, coeffs.shape[0]):
        _csr_matvec(indptr, indices, data, t1, t2)
        c = coeffs[k]
        for i in range(n):
            t2[i] = 2.0 * t2[i] - t0[i]
            out[i] += c * t2[i]
            t0[i] = t1[i]
            t1[i] = t2[i]


if USE_NUMBA:
    _csr_matvec = numba.njit(cache=True)(_csr_matvec_py)
    _rk4_numba = numba.njit(cache=True)(_rk4_steps_py)
    _cheb_numba = numba.njit(cache=True)(_chebyshev_sum_py)
else:
    _csr_matvec = _csr_matvec_py


class Stepper:
    """Bind a CSR operator once and advance states in place."""

    def __init__(self, matrix):
        m = sp.csr_matrix(matrix, dtype=complex)
        m.sort_indices()
        self.matrix = m
        self.indptr = m.indptr.astype(np.int64)
        self.indices = m.indices.astype(np.int64)
        self.data = m.data.astype(complex)
        n = m.shape[0]
        self._buf = [np.empty(n, dtype=complex) for _ in range(5)]

    def rk4(self, psi, dt, nsteps):
        """Advance `psi` (in place) by `nsteps` classical RK4 steps of size `dt`."""
        if nsteps <= 0:
            return psi
        if USE_NUMBA:
            _rk4_numba(self.indptr, self.indices, self.data, psi, dt, nsteps, *self._buf)
            return psi
        h = self.matrix
        half = 0.5 * dt
        for _ in range(nsteps):
            k1 = -1j * (h @ psi)
            k2 = -1j * (h @ (psi + half * k1))
            k3 = -1j * (h @ (psi + half * k2))
            k4 = -1j * (h @ (psi + dt * k3))
            psi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        return psi

    def chebyshev(self, psi, coeffs):
        """Return ``sum_k coeffs[k] T_k(H) psi``; `H` must be pre-scaled to [-1, 1]."""
        coeffs = np.asarray(coeffs, dtype=complex)
        if USE_NUMBA:
            out = np.empty_like(psi)
            t0, t1, t2 = self._buf[:3]
            _cheb_numba(self.indptr, self.indices, self.data, psi, coeffs, out, t0, t1, t2)
            return out
        h = self.matrix
        t0 = psi.copy()
        t1 = h @ psi
        out = coeffs[0] * t0 + coeffs[1] * t1
        for c in coeffs[2:]:
            t2 = 2.0 * (h @ t1) - t0
            out += c * t2
            t0, t1 = t1, t2
        return out
