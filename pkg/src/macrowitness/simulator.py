"""Timed density-matrix execution of circuits with idle noise and branching readout.

Every scheduled moment applies its gates perfectly and instantaneously,
performs any Measure in it, and then lets every qubit idle under the noise
channel for the moment's duration.

Two bookkeeping tricks keep registers small; both are exact because the
noise acts on each qubit independently:

* a qubit that no multi-qubit gate has touched yet stays a separate 2x2
  factor and joins the joint state only when a CNOT first reaches it;
* a measured qubit that no later gate uses is dropped from each branch
  after the measurement collapses it.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

import numpy as np

from .circuits import BARRIER_KIND, MEASURE_KIND, Circuit, GateDurations, schedule
from .errors import ArgumentError
from .noise import NoiseParams, idle_channel
from .qstate import (
    DensityMatrix,
    apply_local_unitary_inplace,
    check_capacity,
    outcome_block,
    outcome_probabilities,
)
from . import kernels

BRANCH_PRUNE = 1e-14


@dataclass
class Branch:
    """One measurement history with its probability and the leftover state.

    ``state`` lives on ``qubits`` (circuit indices, in tensor order); it is
    ``None`` when every qubit was measured and dropped.
    """

    probability: float
    record: dict[str, str]
    state: DensityMatrix | None
    qubits: tuple[int, ...]


@dataclass
class SimulationResult:
    branches: list[Branch]
    duration: float
    labels: list[str] = field(default_factory=list)

    def joint(self, labels: Iterable[str] | None = None) -> dict[tuple[str, ...], float]:
        """Probability of each tuple of register outcomes, summed over other registers."""
        labels = list(labels) if labels is not None else self.labels
        out: dict[tuple[str, ...], float] = {}
        for b in self.branches:
            key = tuple(b.record[lab] for lab in labels)
            out[key] = out.get(key, 0.0) + b.probability
        return out

    def marginal(self, label: str) -> dict[str, float]:
        return {k[0]: v for k, v in self.joint([label]).items()}

    @property
    def total_probability(self) -> float:
        return sum(b.probability for b in self.branches)


class _State:
    """Mutable working state of one branch."""

    __slots__ = ("mat", "active", "lazy", "prob", "record")

    def __init__(self, mat, active, lazy, prob, record):
        self.mat = mat
        self.active = active
        self.lazy = lazy
        self.prob = prob
        self.record = record

    def position(self, q: int) -> int:
        return self.active.index(q)

    def activate(self, q: int) -> int:
        if q in self.lazy:
            check_capacity(len(self.active) + 1)
            self.mat = np.kron(self.mat, self.lazy.pop(q))
            self.active.append(q)
        return self.active.index(q)


def _initial_state(circuit: Circuit, initial) -> _State:
    n = circuit.n_qubits
    if initial is None:
        initial = "0" * n
    if isinstance(initial, DensityMatrix):
        if initial.n_qubits != n:
            raise ArgumentError(f"initial state has {initial.n_qubits} qubits, circuit has {n}")
        check_capacity(n)
        return _State(np.array(initial.matrix), list(range(n)), {}, 1.0, {})
    bits = str(initial)
    if len(bits) != n or any(b not in "01" for b in bits):
        raise ArgumentError(f"initial basis state {bits!r} does not match {n} qubits")
    lazy = {}
    for q, b in enumerate(bits):
        m = np.zeros((2, 2), dtype=complex)
        m[int(b), int(b)] = 1.0
        lazy[q] = m
    return _State(np.ones((1, 1), dtype=complex), [], lazy, 1.0, {})


def _retirement(circuit: Circuit) -> dict[int, set[int]]:
    """For each Measure gate index, the measured qubits no later gate touches."""
    out = {}
    later_use: set[int] = set()
    for k in range(len(circuit.gates) - 1, -1, -1):
        g = circuit.gates[k]
        if g.kind == MEASURE_KIND:
            out[k] = set(g.qubits) - later_use
        if g.kind != BARRIER_KIND:
            later_use.update(g.qubits)
    return out


def _apply_unitary(s: _State, gate) -> None:
    op = gate.operator().matrix
    if len(gate.qubits) == 1 and gate.qubits[0] in s.lazy:
        q = gate.qubits[0]
        s.lazy[q] = op @ s.lazy[q] @ op.conj().T
        return
    pos = [s.activate(q) for q in gate.qubits]
    s.mat = apply_local_unitary_inplace(s.mat, op, pos)


def _measure(s: _State, gate, retire: set[int], prune: float) -> list[_State]:
    for q in gate.qubits:
        s.activate(q)
    pos = [s.position(q) for q in gate.qubits]
    probs = outcome_probabilities(s.mat, pos)
    gone = [q for q in gate.qubits if q in retire]
    kept = [q for q in gate.qubits if q not in retire]
    out = []
    for bits, p in probs.items():
        if s.prob * p <= prune:
            continue
        bit_of = dict(zip(gate.qubits, bits))
        gone_pos = [s.position(q) for q in gone]
        mat = outcome_block(s.mat, gone_pos, "".join(bit_of[q] for q in gone))
        active = [q for q in s.active if q not in gone]
        if kept:
            n_left = len(active)
            t = mat.reshape((2,) * (2 * n_left))
            mask = np.zeros_like(t)
            idx: list = [slice(None)] * (2 * n_left)
            for q in kept:
                a = active.index(q)
                idx[a] = idx[n_left + a] = int(bit_of[q])
            mask[tuple(idx)] = t[tuple(idx)]
            mat = mask.reshape(mat.shape)
        mat = np.ascontiguousarray(mat / p)
        record = dict(s.record)
        record[gate.label] = bits
        lazy = {q: m.copy() for q, m in s.lazy.items()}
        out.append(_State(mat, active, lazy, s.prob * p, record))
    return out


def _idle(s: _State, noise: NoiseParams, duration: float, readout: bool) -> None:
    include_errors = readout or not noise.errors_on_measure_only
    base = idle_channel(noise, duration, include_errors).superoperator
    n = len(s.active)
    for pos, q in enumerate(s.active):
        sup = base if noise.is_uniform else idle_channel(noise.for_qubit(q), duration, include_errors).superoperator
        kernels.apply_1q_superop(s.mat, n, pos, sup)
    for q, m in s.lazy.items():
        sup = base if noise.is_uniform else idle_channel(noise.for_qubit(q), duration, include_errors).superoperator
        s.lazy[q] = (sup @ m.reshape(-1, order="F")).reshape(2, 2, order="F")


def simulate(
    circuit: Circuit,
    noise: NoiseParams | None = None,
    durations: GateDurations | None = None,
    initial: str | DensityMatrix | None = None,
    prune: float = BRANCH_PRUNE,
) -> SimulationResult:
    """Run ``circuit`` from ``initial`` (a basis bit-string or a state; default all zeros).

    Returns every measurement branch whose probability exceeds ``prune``.
    """
    durations = durations or GateDurations()
    moments = schedule(circuit, durations)
    noisy = noise is not None and noise.enabled
    # Map gates back to their circuit index to find retirement sets.
    retire_at = _retirement(circuit)
    gate_index = {id(g): k for k, g in enumerate(circuit.gates)}

    states = [_initial_state(circuit, initial)]
    total = 0.0
    for m in moments:
        unitary = [g for g in m.gates if g.is_unitary]
        measures = [g for g in m.gates if g.kind == MEASURE_KIND]
        for s in states:
            for g in unitary:
                _apply_unitary(s, g)
        for g in measures:
            retire = retire_at[gate_index[id(g)]]
            states = [b for s in states for b in _measure(s, g, retire, prune)]
        if noisy and m.duration > 0:
            for s in states:
                _idle(s, noise, m.duration, m.is_readout)
        total += m.duration

    branches = []
    for s in states:
        for q in sorted(s.lazy):
            s.activate(q)
        state = DensityMatrix(s.mat, check=False) if s.active else None
        branches.append(Branch(s.prob, s.record, state, tuple(s.active)))
    return SimulationResult(branches, total, circuit.measure_labels)


def final_state(
    circuit: Circuit,
    noise: NoiseParams | None = None,
    durations: GateDurations | None = None,
    initial: str | DensityMatrix | None = None,
) -> DensityMatrix:
    """State after a measurement-free circuit, with qubits in circuit order."""
    if circuit.has_measure:
        raise ArgumentError("final_state needs a circuit without Measure gates")
    (b,) = simulate(circuit, noise, durations, initial).branches
    return reorder(b.state, b.qubits)


def reorder(state: DensityMatrix, qubits: tuple[int, ...]) -> DensityMatrix:
    """Permute tensor factors so that qubit ``k`` of the result is circuit qubit ``k``."""
    n = len(qubits)
    order = sorted(range(n), key=lambda k: qubits[k])
    if order == list(range(n)):
        return state
    t = state.matrix.reshape((2,) * (2 * n))
    t = np.transpose(t, order + [n + k for k in order])
    return DensityMatrix(np.ascontiguousarray(t.reshape(state.matrix.shape)), check=False)


def distribution_from(result: SimulationResult, label: str, n: int) -> dict[str, float]:
    """Marginal of ``label`` over every ``n``-bit outcome, zeros included."""
    from .qstate import all_bitstrings

    marg = result.marginal(label)
    return {k: marg.get(k, 0.0) for k in all_bitstrings(n)}


def conditional(joint: Mapping[tuple[str, str], float]) -> dict[str, dict[str, float]]:
    """``p(j | i)`` from a joint map keyed by ``(i, j)``."""
    marg: dict[str, float] = {}
    for (i, _), p in joint.items():
        marg[i] = marg.get(i, 0.0) + p
    out: dict[str, dict[str, float]] = {}
    for (i, j), p in joint.items():
        if marg[i] > 0:
            out.setdefault(i, {})[j] = p / marg[i]
    return out
