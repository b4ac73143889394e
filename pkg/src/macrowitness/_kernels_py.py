"""Pure-numpy versions of the in-place kernels in ``_kernels.pyx``.

Same calling convention: ``rho`` is a C-contiguous complex128 array of
shape (2**n, 2**n) that is modified in place; qubit 0 is the most
significant bit of a basis index.
"""
import numpy as np


def _row_view(rho, n, q):
    dim = rho.shape[0]
    return rho.reshape(1 << q, 2, 1 << (n - 1 - q), dim)


def _col_view(rho, n, q):
    dim = rho.shape[0]
    return rho.reshape(dim, 1 << q, 2, 1 << (n - 1 - q))


def apply_1q(rho, n, q, u):
    rows = _row_view(rho, n, q)
    a = rows[:, 0].copy()
    b = rows[:, 1]
    rows[:, 0] = u[0, 0] * a + u[0, 1] * b
    rows[:, 1] = u[1, 0] * a + u[1, 1] * b
    v = u.conj()
    cols = _col_view(rho, n, q)
    a = cols[:, :, 0].copy()
    b = cols[:, :, 1]
    cols[:, :, 0] = a * v[0, 0] + b * v[0, 1]
    cols[:, :, 1] = a * v[1, 0] + b * v[1, 1]


def _swap(x, y):
    tmp = x.copy()
    x[...] = y
    y[...] = tmp


def apply_cnot(rho, n, control, target):
    dim = rho.shape[0]
    rows = rho.reshape((2,) * n + (dim,))
    idx0 = [slice(None)] * (n + 1)
    idx0[control] = 1
    idx1 = list(idx0)
    idx0[target] = 0
    idx1[target] = 1
    _swap(rows[tuple(idx0)], rows[tuple(idx1)])
    cols = rho.reshape((dim,) + (2,) * n)
    idx0 = [slice(None)] * (n + 1)
    idx0[1 + control] = 1
    idx1 = list(idx0)
    idx0[1 + target] = 0
    idx1[1 + target] = 1
    _swap(cols[tuple(idx0)], cols[tuple(idx1)])


def apply_1q_superop(rho, n, q, s):
    lo, hi = 1 << q, 1 << (n - 1 - q)
    view = rho.reshape(lo, 2, hi, lo, 2, hi)
    # vec index = row + 2 * col of the local 2x2 block
    blocks = [view[:, 0, :, :, 0, :].copy(), view[:, 1, :, :, 0, :].copy(),
              view[:, 0, :, :, 1, :].copy(), view[:, 1, :, :, 1, :].copy()]
    for k, (a, b) in enumerate(((0, 0), (1, 0), (0, 1), (1, 1))):
        out = view[:, a, :, :, b, :]
        out[...] = 0
        for j in range(4):
            if s[k, j] != 0:
                out += s[k, j] * blocks[j]
