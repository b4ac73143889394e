# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled in-place kernels for dense density matrices.

All kernels act on a C-contiguous complex128 array of shape (2**n, 2**n).
Qubit ``q`` is the bit of weight ``2**(n - 1 - q)`` in a basis index, so
qubit 0 is the most significant (leftmost) bit.
"""
import numpy as np

ctypedef double complex cplx


cdef inline Py_ssize_t _mask(int n, int q) nogil:
    return (<Py_ssize_t>1) << (n - 1 - q)


def apply_1q(cplx[:, ::1] rho, int n, int q, const cplx[:, ::1] u):
    """rho <- U rho U^dagger with U acting on qubit ``q``."""
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t m = _mask(n, q)
    cdef Py_ssize_t r, c, r1, c1
    cdef cplx a, b
    cdef cplx u00 = u[0, 0], u01 = u[0, 1], u10 = u[1, 0], u11 = u[1, 1]
    cdef cplx v00 = u00.conjugate(), v01 = u01.conjugate()
    cdef cplx v10 = u10.conjugate(), v11 = u11.conjugate()
    with nogil:
        # rows: U rho
        for r in range(dim):
            if r & m:
                continue
            r1 = r | m
            for c in range(dim):
                a = rho[r, c]
                b = rho[r1, c]
                rho[r, c] = u00 * a + u01 * b
                rho[r1, c] = u10 * a + u11 * b
        # columns: (U rho) U^dagger
        for r in range(dim):
            for c in range(dim):
                if c & m:
                    continue
                c1 = c | m
                a = rho[r, c]
                b = rho[r, c1]
                rho[r, c] = a * v00 + b * v01
                rho[r, c1] = a * v10 + b * v11


def apply_cnot(cplx[:, ::1] rho, int n, int control, int target):
    """rho <- P rho P for the CNOT permutation P."""
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t mc = _mask(n, control), mt = _mask(n, target)
    cdef Py_ssize_t r, c, r1, c1
    cdef cplx tmp
    with nogil:
        for r in range(dim):
            if (r & mc) == 0 or (r & mt):
                continue
            r1 = r | mt
            for c in range(dim):
                tmp = rho[r, c]
                rho[r, c] = rho[r1, c]
                rho[r1, c] = tmp
        for r in range(dim):
            for c in range(dim):
                if (c & mc) == 0 or (c & mt):
                    continue
                c1 = c | mt
                tmp = rho[r, c]
                rho[r, c] = rho[r, c1]
                rho[r, c1] = tmp


def apply_1q_superop(cplx[:, ::1] rho, int n, int q, const cplx[:, ::1] s):
    """Apply a 4x4 column-stacked superoperator to qubit ``q`` of rho."""
    cdef Py_ssize_t dim = rho.shape[0]
    cdef Py_ssize_t m = _mask(n, q)
    cdef Py_ssize_t r, c, r1, c1
    cdef cplx x0, x1, x2, x3
    cdef cplx s_[4][4]
    cdef int i, j
    for i in range(4):
        for j in range(4):
            s_[i][j] = s[i, j]
    with nogil:
        for r in range(dim):
            if r & m:
                continue
            r1 = r | m
            for c in range(dim):
                if c & m:
                    continue
                c1 = c | m
                # vec index = row + 2 * col of the local 2x2 block
                x0 = rho[r, c]
                x1 = rho[r1, c]
                x2 = rho[r, c1]
                x3 = rho[r1, c1]
                rho[r, c] = s_[0][0] * x0 + s_[0][1] * x1 + s_[0][2] * x2 + s_[0][3] * x3
                rho[r1, c] = s_[1][0] * x0 + s_[1][1] * x1 + s_[1][2] * x2 + s_[1][3] * x3
                rho[r, c1] = s_[2][0] * x0 + s_[2][1] * x1 + s_[2][2] * x2 + s_[2][3] * x3
                rho[r1, c1] = s_[3][0] * x0 + s_[3][1] * x1 + s_[3][2] * x2 + s_[3][3] * x3
