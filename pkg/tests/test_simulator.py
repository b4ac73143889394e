import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from macrowitness.circuits import (
    CNOT,
    H,
    U3,
    Barrier,
    Circuit,
    GateDurations,
    Measure,
    schedule,
)
from macrowitness.errors import ArgumentError
from macrowitness.noise import FITTED_NOISE, NoiseParams, idle_channel
from macrowitness.qstate import DensityMatrix
from macrowitness.simulator import final_state, simulate


def _full(op, qubits, n):
    """Full-space matrix of ``op`` on ``qubits`` by column action."""
    d = 1 << n
    out = np.zeros((d, d), dtype=complex)
    k = len(qubits)
    for col in range(d):
        bits = list(format(col, f"0{n}b"))
        sub = int("".join(bits[q] for q in qubits), 2)
        for r in range(1 << k):
            rb = format(r, f"0{k}b")
            nb = bits[:]
            for q, b in zip(qubits, rb):
                nb[q] = b
            out[int("".join(nb), 2), col] += op[r, sub]
    return out


def _noise_full(s, n):
    """Full superoperator-free action: apply 4x4 map to each qubit via reshape."""
    def apply(rho):
        for q in range(n):
            t = rho.reshape((2,) * (2 * n))
            t = np.moveaxis(t, (q, n + q), (0, 1)).copy()
            a00, a10, a01, a11 = t[0, 0].copy(), t[1, 0].copy(), t[0, 1].copy(), t[1, 1].copy()
            v = [a00, a10, a01, a11]
            new = [sum(s[i, j] * v[j] for j in range(4)) for i in range(4)]
            t[0, 0], t[1, 0], t[0, 1], t[1, 1] = new
            rho = np.moveaxis(t, (0, 1), (q, n + q)).reshape(rho.shape)
        return rho
    return apply


def naive_simulate(circuit, noise, durations, initial):
    """Every qubit always in one full register; branches keyed by record tuple."""
    n = circuit.n_qubits
    d = 1 << n
    rho = np.zeros((d, d), dtype=complex)
    i0 = int(initial, 2)
    rho[i0, i0] = 1
    branches = [((), 1.0, rho)]
    for m in schedule(circuit, durations):
        for g in m.gates:
            if g.is_unitary:
                u = _full(g.operator().matrix, g.qubits, n)
                branches = [(r, p, u @ s @ u.conj().T) for r, p, s in branches]
        for g in m.gates:
            if g.kind == "measure":
                new = []
                for r, p, s in branches:
                    for idx in range(1 << len(g.qubits)):
                        bits = format(idx, f"0{len(g.qubits)}b")
                        proj = np.zeros(d)
                        for col in range(d):
                            cb = format(col, f"0{n}b")
                            if all(cb[q] == b for q, b in zip(g.qubits, bits)):
                                proj[col] = 1
                        post = proj[:, None] * s * proj[None, :]
                        q = np.trace(post).real
                        if q > 1e-14:
                            new.append((r + (bits,), p * q, post / q))
                branches = new
        if m.duration > 0 and noise is not None:
            f = _noise_full(idle_channel(noise, m.duration).superoperator, n)
            branches = [(r, p, f(s)) for r, p, s in branches]
    return branches


gate_st = st.sampled_from(["h0", "h1", "h2", "u0", "u2", "c01", "c12", "c20", "b"])


def build(ops, n=3):
    table = {
        "h0": H(0), "h1": H(1), "h2": H(2), "u0": U3(0.3, -0.2, 1.1, 0), "u2": U3(0, 0, 0.7, 2),
        "c01": CNOT(0, 1), "c12": CNOT(1, 2), "c20": CNOT(2, 0), "b": Barrier(),
    }
    return [table[o] for o in ops]


@given(
    st.lists(gate_st, max_size=6),
    st.lists(gate_st, max_size=6),
    st.sampled_from([(0,), (1,), (0, 2)]),
    st.sampled_from(["000", "101"]),
)
def test_branching_matches_naive_reference(pre, post, measured, initial):
    c = Circuit(3, build(pre) + [Measure(measured, "m")] + build(post))
    ref = naive_simulate(c, FITTED_NOISE, GateDurations(), initial)
    res = simulate(c, FITTED_NOISE, GateDurations(), initial)
    got = res.joint(["m"])
    expect: dict = {}
    for r, p, _ in ref:
        expect[r] = expect.get(r, 0.0) + p
    assert set(got) == set(expect)
    for k in expect:
        assert got[k] == pytest.approx(expect[k], abs=1e-12)
    # reduced states on surviving qubits agree
    ref_states = {r: s for r, p, s in ref}
    for b in res.branches:
        full = ref_states[(b.record["m"],)]
        keep = list(b.qubits)
        t = full.reshape((2,) * 6)
        gone = [q for q in range(3) if q not in keep]
        for q in sorted(gone, reverse=True):
            t = np.trace(t, axis1=q, axis2=q + t.ndim // 2)
        red = t.reshape(1 << len(keep), 1 << len(keep))
        # b.qubits lists tensor order; ``keep`` is that order, reduction above keeps ascending order
        order = sorted(range(len(keep)), key=lambda k: keep[k])
        tt = b.state.matrix.reshape((2,) * (2 * len(keep)))
        tt = np.transpose(tt, order + [len(keep) + k for k in order]).reshape(red.shape)
        assert np.abs(tt - red).max() < 1e-12


def test_total_probability_is_one():
    c = Circuit(2, [H(0), CNOT(0, 1), Measure([0, 1], "m")])
    res = simulate(c, FITTED_NOISE)
    assert res.total_probability == pytest.approx(1.0, abs=1e-12)


def test_duration_accumulates():
    c = Circuit(2, [H(0), CNOT(0, 1), Barrier(), H(1)])
    assert simulate(c).duration == pytest.approx(0.6)


def test_lazy_qubits_idle_too():
    # qubit 1 never touched: it still relaxes during qubit 0's gates
    p = NoiseParams(t1=1.0, t2=2.0)
    c = Circuit(2, [U3(0, 0, math.pi, 0), U3(0, 0, math.pi, 1), Barrier(), H(0), H(0), H(0)])
    rho = final_state(c, p, GateDurations(u3_time=0.5, h_time=0.5))
    p1 = rho.distribution()
    pop1 = p1["01"] + p1["11"]
    assert pop1 == pytest.approx(math.exp(-2.0), abs=1e-12)


def test_errors_on_measure_only():
    base = NoiseParams(t1=1e12, t2=2e12, gamma_errors=0.5)
    only = NoiseParams(t1=1e12, t2=2e12, gamma_errors=0.5, errors_on_measure_only=True)
    c = Circuit(1, [H(0), H(0)])
    assert final_state(c, base).distribution()["1"] > 0.01
    assert final_state(c, only).distribution()["1"] == pytest.approx(0.0, abs=1e-12)


def test_per_qubit_noise_applied():
    fast = NoiseParams(t1=0.5, t2=1.0)
    p = NoiseParams(t1=1e12, t2=2e12, per_qubit=((1, fast),))
    c = Circuit(2, [U3(0, 0, math.pi, 0), U3(0, 0, math.pi, 1), Barrier(), H(0), H(0)])
    dist = final_state(c, p).distribution()
    assert dist["10"] + dist["11"] == pytest.approx(1.0, abs=1e-9)
    assert dist["11"] < 0.9


def test_initial_state_validation():
    c = Circuit(2, [H(0)])
    with pytest.raises(ArgumentError):
        simulate(c, initial="0")
    with pytest.raises(ArgumentError):
        simulate(c, initial=DensityMatrix.basis("000"))
    with pytest.raises(ArgumentError):
        final_state(Circuit(1, [Measure([0], "m")]))


def test_pruning_drops_rare_branches():
    c = Circuit(1, [U3(0, 0, 1e-4, 0), Measure([0], "m")])
    assert len(simulate(c).branches) == 2
    assert len(simulate(c, prune=1e-6).branches) == 1


def test_backends_give_same_simulation():
    from macrowitness import kernels

    c = Circuit(4, [H(0), CNOT(0, 1), CNOT(1, 2), CNOT(2, 3), Measure([1, 3], "m")])
    outs = []
    for name in kernels.available_backends():
        with kernels.use_backend(name):
            outs.append(simulate(c, FITTED_NOISE).joint())
    for o in outs[1:]:
        assert o.keys() == outs[0].keys()
        for k in o:
            assert o[k] == pytest.approx(outs[0][k], abs=1e-13)
