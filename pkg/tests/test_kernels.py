import numpy as np
import pytest
from hypothesis import given, strategies as st

from macrowitness import kernels
from macrowitness.noise import FITTED_NOISE, idle_channel
from macrowitness.qstate import CNOT, HADAMARD, u3

from conftest import random_density

BACKENDS = kernels.available_backends()


def embed(op, q, n):
    out = np.eye(1)
    for k in range(n):
        out = np.kron(out, op if k == q else np.eye(2))
    return out


def cnot_full(c, t, n):
    m = np.zeros((1 << n, 1 << n))
    for idx in range(1 << n):
        bits = list(format(idx, f"0{n}b"))
        if bits[c] == "1":
            bits[t] = str(1 - int(bits[t]))
        m[int("".join(bits), 2), idx] = 1
    return m


def test_active_backend_is_listed():
    assert kernels.BACKEND in BACKENDS
    assert "python" in BACKENDS


def test_unknown_backend_rejected():
    with pytest.raises(ValueError):
        kernels.get_backend("fortran")


@pytest.mark.parametrize("backend", BACKENDS)
@given(
    n=st.integers(1, 4),
    data=st.data(),
    angles=st.tuples(*[st.floats(-np.pi, np.pi)] * 3),
)
def test_apply_1q_matches_full_matrix(backend, n, data, angles):
    q = data.draw(st.integers(0, n - 1))
    rho = random_density(n, np.random.default_rng(n + q))
    u = np.ascontiguousarray(u3(*angles).matrix)
    full = embed(u, q, n)
    expect = full @ rho @ full.conj().T
    work = np.ascontiguousarray(rho.copy())
    kernels.get_backend(backend).apply_1q(work, n, q, u)
    assert np.allclose(work, expect, atol=1e-13)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("n,c,t", [(2, 0, 1), (2, 1, 0), (3, 0, 2), (4, 3, 1)])
def test_apply_cnot_matches_permutation(backend, n, c, t):
    rho = random_density(n, np.random.default_rng(7))
    p = cnot_full(c, t, n)
    work = rho.copy()
    kernels.get_backend(backend).apply_cnot(work, n, c, t)
    assert np.allclose(work, p @ rho @ p.T, atol=1e-14)


@pytest.mark.parametrize("backend", BACKENDS)
@pytest.mark.parametrize("q", [0, 1, 2])
def test_superop_matches_kraus_free_reference(backend, q):
    n = 3
    rho = random_density(n, np.random.default_rng(q))
    s = np.ascontiguousarray(idle_channel(FITTED_NOISE, 0.7).superoperator)
    # reference: act on the reshaped tensor directly
    t = rho.reshape((2,) * 6)
    t = np.moveaxis(t, (q, n + q), (0, 1))
    flat = t.reshape(2, 2, -1)
    vec = np.stack([flat[0, 0], flat[1, 0], flat[0, 1], flat[1, 1]])
    out = s @ vec
    new = np.empty_like(flat)
    new[0, 0], new[1, 0], new[0, 1], new[1, 1] = out
    expect = np.moveaxis(new.reshape(t.shape), (0, 1), (q, n + q)).reshape(rho.shape)
    work = rho.copy()
    kernels.get_backend(backend).apply_1q_superop(work, n, q, s)
    assert np.allclose(work, expect, atol=1e-14)


def test_backends_agree_on_a_gate_sequence():
    if len(BACKENDS) < 2:
        pytest.skip("only one backend built")
    rng = np.random.default_rng(3)
    n = 5
    rho = random_density(n, rng)
    h = np.ascontiguousarray(HADAMARD.matrix)
    s = np.ascontiguousarray(idle_channel(FITTED_NOISE, 0.4).superoperator)
    outs = []
    for name in BACKENDS:
        k = kernels.get_backend(name)
        w = rho.copy()
        for q in range(n):
            k.apply_1q(w, n, q, h)
            k.apply_cnot(w, n, q, (q + 1) % n)
            k.apply_1q_superop(w, n, q, s)
        outs.append(w)
    assert np.allclose(outs[0], outs[1], atol=1e-13)


def test_use_backend_restores_previous():
    before = kernels.BACKEND
    with kernels.use_backend("python"):
        assert kernels.BACKEND == "python"
    assert kernels.BACKEND == before


def test_cnot_operator_control_first():
    assert np.array_equal(CNOT.matrix @ np.eye(4)[:, 2], np.eye(4)[:, 3])
