"""Gate-level circuits, moment scheduling and the witness circuit builders."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ArgumentError
from .qstate import CNOT as CNOT_OP
from .qstate import HADAMARD, Operator, check_capacity, qubit_subset, u3

U3_KIND = "u3"
CNOT_KIND = "cx"
H_KIND = "h"
BARRIER_KIND = "barrier"
MEASURE_KIND = "measure"

READOUT_TAG = "readout"


@dataclass(frozen=True)
class Gate:
    """One circuit instruction.

    ``params`` holds ``(lam, vartheta, theta)`` for U3 gates. ``label`` names
    the classical register of a Measure; ``tag`` marks gates that belong to
    an ancilla readout block.
    """

    kind: str
    qubits: tuple[int, ...]
    params: tuple[float, ...] = ()
    label: str | None = None
    tag: str | None = None

    def __post_init__(self):
        if self.kind not in (U3_KIND, CNOT_KIND, H_KIND, BARRIER_KIND, MEASURE_KIND):
            raise ArgumentError(f"unknown gate kind {self.kind!r}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ArgumentError(f"{self.kind} gate repeats a qubit: {self.qubits}")
        if self.kind == CNOT_KIND and len(self.qubits) != 2:
            raise ArgumentError("CNOT needs exactly a control and a target")
        if self.kind in (U3_KIND, H_KIND) and len(self.qubits) != 1:
            raise ArgumentError(f"{self.kind} acts on exactly one qubit")
        if self.kind == MEASURE_KIND and (not self.qubits or not self.label):
            raise ArgumentError("Measure needs targets and a register label")
        if self.kind == U3_KIND and (
            len(self.params) != 3 or not all(math.isfinite(p) for p in self.params)
        ):
            raise ArgumentError(f"U3 needs three finite angles, got {self.params}")

    @property
    def is_unitary(self) -> bool:
        return self.kind in (U3_KIND, CNOT_KIND, H_KIND)

    def operator(self) -> Operator:
        if self.kind == U3_KIND:
            return u3(*self.params)
        if self.kind == CNOT_KIND:
            return CNOT_OP
        if self.kind == H_KIND:
            return HADAMARD
        raise ArgumentError(f"{self.kind} has no unitary")

    def inverse(self) -> "Gate":
        if self.kind == U3_KIND:
            lam, vartheta, theta = self.params
            return Gate(U3_KIND, self.qubits, (-vartheta, -lam, -theta), tag=self.tag)
        if self.kind == MEASURE_KIND:
            raise ArgumentError("a Measure has no inverse")
        return self


def U3(lam: float, vartheta: float, theta: float, qubit: int) -> Gate:
    return Gate(U3_KIND, (qubit,), (float(lam), float(vartheta), float(theta)))


def CNOT(control: int, target: int, tag: str | None = None) -> Gate:
    if control == target:
        raise ArgumentError("CNOT control and target must differ")
    return Gate(CNOT_KIND, (control, target), tag=tag)


def H(qubit: int) -> Gate:
    return Gate(H_KIND, (qubit,))


def Barrier(qubits: Iterable[int] = ()) -> Gate:
    """Scheduling fence. An empty qubit list means the whole register."""
    return Gate(BARRIER_KIND, tuple(qubits))


def Measure(targets: Iterable[int], label: str) -> Gate:
    return Gate(MEASURE_KIND, tuple(targets), label=label)


@dataclass(frozen=True)
class GateDurations:
    """Gate times in microseconds."""

    u3_time: float = 0.1
    cnot_time: float = 0.4
    h_time: float = 0.1
    measure_time: float = 0.0

    def __post_init__(self):
        for name in ("u3_time", "cnot_time", "h_time", "measure_time"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ArgumentError(f"{name} must be a finite non-negative time, got {value}")

    def of(self, gate: Gate) -> float:
        return {
            U3_KIND: self.u3_time,
            CNOT_KIND: self.cnot_time,
            H_KIND: self.h_time,
            MEASURE_KIND: self.measure_time,
            BARRIER_KIND: 0.0,
        }[gate.kind]


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple[Gate, ...] = ()
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        if self.n_qubits < 1:
            raise ArgumentError("a circuit needs at least one qubit")
        measured: set[int] = set()
        for g in self.gates:
            for q in g.qubits:
                if not 0 <= q < self.n_qubits:
                    raise ArgumentError(
                        f"{g.kind} on qubit {q} is outside the {self.n_qubits}-qubit register"
                    )
            if g.kind == MEASURE_KIND:
                again = measured.intersection(g.qubits)
                if again:
                    raise ArgumentError(f"qubits {sorted(again)} are measured more than once")
                measured.update(g.qubits)

    def __add__(self, other: "Circuit") -> "Circuit":
        n = max(self.n_qubits, other.n_qubits)
        name = "+".join(x for x in (self.name, other.name) if x)
        return Circuit(n, self.gates + other.gates, name)

    def widened(self, n_qubits: int) -> "Circuit":
        if n_qubits < self.n_qubits:
            raise ArgumentError("cannot shrink a circuit")
        return Circuit(n_qubits, self.gates, self.name)

    def renamed(self, name: str) -> "Circuit":
        return Circuit(self.n_qubits, self.gates, name)

    def with_gates(self, *gates: Gate) -> "Circuit":
        return Circuit(self.n_qubits, self.gates + tuple(gates), self.name)

    @property
    def has_measure(self) -> bool:
        return any(g.kind == MEASURE_KIND for g in self.gates)

    @property
    def measure_labels(self) -> list[str]:
        return [g.label for g in self.gates if g.kind == MEASURE_KIND]

    def unitary_matrix(self) -> np.ndarray:
        """Full-space matrix of the unitary gates (small registers only)."""
        check_capacity(self.n_qubits)
        d = 1 << self.n_qubits
        u = np.eye(d, dtype=complex)
        for g in self.gates:
            if not g.is_unitary:
                continue
            u = _apply_to_columns(u, g.operator().matrix, g.qubits, self.n_qubits)
        return u


def _apply_to_columns(vecs: np.ndarray, op: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    k = len(targets)
    t = vecs.reshape((2,) * n + (vecs.shape[1],))
    t = np.tensordot(op.reshape((2,) * (2 * k)), t, axes=(list(range(k, 2 * k)), list(targets)))
    t = np.moveaxis(t, list(range(k)), list(targets))
    return t.reshape(vecs.shape)


@dataclass(frozen=True)
class Moment:
    """Gates with disjoint supports executed together, then idle for ``duration``."""

    gates: tuple[Gate, ...]
    duration: float

    @property
    def is_readout(self) -> bool:
        return any(g.kind == MEASURE_KIND or g.tag == READOUT_TAG for g in self.gates)


def schedule(c: Circuit, d: GateDurations | None = None) -> list[Moment]:
    """Left-justified moment packing.

    A gate joins the earliest moment after the last Barrier in which all of
    its qubits are free. A Barrier closes every open moment.
    """
    d = d or GateDurations()
    slots: list[list[Gate]] = []
    free_at = [0] * c.n_qubits
    floor = 0
    for g in c.gates:
        if g.kind == BARRIER_KIND:
            floor = len(slots)
            continue
        k = max([floor] + [free_at[q] for q in g.qubits])
        while len(slots) <= k:
            slots.append([])
        slots[k].append(g)
        for q in g.qubits:
            free_at[q] = k + 1
    return [Moment(tuple(gs), max(d.of(g) for g in gs)) for gs in slots]


def circuit_duration(c: Circuit, d: GateDurations | None = None) -> float:
    return sum(m.duration for m in schedule(c, d))


# --- builders -------------------------------------------------------------


def cat_preparation_circuit(n: int, theta: float) -> Circuit:
    """U3(0, 0, theta) on qubit 0 followed by the CNOT chain 0->1->...->n-1."""
    if n < 2:
        raise ArgumentError("cat preparation needs n >= 2 qubits")
    check_capacity(n)
    gates = [U3(0.0, 0.0, theta, 0)] + [CNOT(k, k + 1) for k in range(n - 1)]
    return Circuit(n, gates, name=f"cat(n={n})")


def rotation_preparation_circuit(theta: float) -> Circuit:
    """Single-qubit analogue of the cat preparation: only the U3 rotation."""
    return Circuit(1, [U3(0.0, 0.0, theta, 0)], name="cat(n=1)")


def product_preparation_circuit(n: int) -> Circuit:
    if n < 1:
        raise ArgumentError("product preparation needs n >= 1")
    check_capacity(n)
    return Circuit(n, [H(q) for q in range(n)], name=f"product(n={n})")


def basis_preparation_circuit(bits: str) -> Circuit:
    """Flip each qubit whose bit is 1 with U3(0, 0, pi)."""
    if not bits or any(b not in "01" for b in bits):
        raise ArgumentError(f"invalid bit-string {bits!r}")
    gates = [U3(0.0, 0.0, math.pi, q) for q, b in enumerate(bits) if b == "1"]
    return Circuit(len(bits), gates, name=f"basis({bits})")


def inverse_circuit(c: Circuit) -> Circuit:
    """Gates reversed and individually inverted; Barriers stay in place."""
    if c.has_measure:
        raise ArgumentError("cannot invert a circuit that contains Measure")
    name = f"{c.name}^dag" if c.name else ""
    return Circuit(c.n_qubits, [g.inverse() for g in reversed(c.gates)], name)


def attach_ancilla_measurement(
    c: Circuit,
    system: Sequence[int],
    ancillas: Sequence[int],
    label: str = "mid",
    serial: bool = False,
) -> Circuit:
    """Append CNOT(system[k] -> ancillas[k]) for every k, then Measure the ancillas.

    The register grows to hold the ancillas if needed. With ``serial`` the
    CNOTs are separated by Barriers so they occupy one moment each.
    """
    system = list(system)
    ancillas = list(ancillas)
    if len(system) != len(ancillas):
        raise ArgumentError(f"{len(system)} system qubits but {len(ancillas)} ancillas")
    if set(system) & set(ancillas):
        raise ArgumentError("system and ancilla qubits overlap")
    n = max([c.n_qubits] + [q + 1 for q in system + ancillas])
    qubit_subset(system, n)
    qubit_subset(ancillas, n)
    check_capacity(n)
    gates: list[Gate] = []
    for k, (s, a) in enumerate(zip(system, ancillas)):
        if serial and k:
            gates.append(Barrier())
        gates.append(CNOT(s, a, tag=READOUT_TAG))
    gates.append(Measure(ancillas, label))
    return Circuit(n, c.gates + tuple(gates), c.name)


def blind_circuit(prep: Circuit, label: str = "final") -> Circuit:
    """prep, Barrier, prep^dagger, final Measure: the run without an intermediate measurement."""
    n = prep.n_qubits
    c = prep.with_gates(Barrier()) + inverse_circuit(prep)
    return c.with_gates(Measure(range(n), label)).renamed(f"blind[{prep.name}]")


def direct_measure_circuit(prep: Circuit, serial: bool = False) -> Circuit:
    """Witness circuit with the intermediate measurement copied onto ancillas.

    System qubits are ``0..n-1`` and ancilla ``n + k`` records system qubit ``k``.
    """
    n = prep.n_qubits
    check_capacity(2 * n)
    c = prep.widened(2 * n).with_gates(Barrier())
    c = attach_ancilla_measurement(c, range(n), range(n, 2 * n), label="mid", serial=serial)
    c = c.with_gates(Barrier()) + inverse_circuit(prep)
    return c.with_gates(Measure(range(n), "final")).renamed(f"direct[{prep.name}]")


def prepare_measure_circuits(prep: Circuit) -> tuple[Circuit, Callable[..., Circuit]]:
    """First-stage circuit and a factory for the second-stage circuit of a basis state.

    ``second(bits)`` starts with explicit flips into ``|bits>`` (what a device
    would run); ``second(bits, with_preparation=False)`` assumes the register
    is already in ``|bits>``.
    """
    n = prep.n_qubits
    first = prep.with_gates(Measure(range(n), "mid")).renamed(f"pm1[{prep.name}]")
    inv = inverse_circuit(prep)

    def second(bits: str, with_preparation: bool = True) -> Circuit:
        if len(bits) != n:
            raise ArgumentError(f"expected a {n}-bit basis state, got {bits!r}")
        c = Circuit(n, [], "")
        if with_preparation:
            c = basis_preparation_circuit(bits).with_gates(Barrier())
        c = c + inv
        return c.with_gates(Measure(range(n), "final")).renamed(f"pm2[{prep.name}|{bits}]")

    return first, second


# --- OpenQASM 2.0 ---------------------------------------------------------

QASM_HEADER = 'OPENQASM 2.0;\ninclude "qelib1.inc";\n'


def format_angle(x: float) -> str:
    """Angle as a small rational multiple of pi when it is one, else a float literal."""
    if x == 0:
        return "0"
    frac = Fraction(x / math.pi).limit_denominator(64)
    if abs(float(frac) * math.pi - x) < 1e-12:
        num, den = frac.numerator, frac.denominator
        sign = "-" if num < 0 else ""
        num = abs(num)
        head = "pi" if num == 1 else f"{num}*pi"
        return f"{sign}{head}" if den == 1 else f"{sign}{head}/{den}"
    return repr(float(x))


def to_qasm(c: Circuit) -> str:
    """OpenQASM 2.0 text for ``c``; one creg per Measure label."""
    lines = [QASM_HEADER.rstrip("\n"), f"qreg q[{c.n_qubits}];"]
    for g in c.gates:
        if g.kind == MEASURE_KIND:
            lines.append(f"creg {g.label}[{len(g.qubits)}];")
    for g in c.gates:
        if g.kind == U3_KIND:
            lam, vartheta, theta = g.params
            # qelib1 order is u3(theta, phi, lambda) with phi on the lower-left entry
            args = ",".join(format_angle(a) for a in (theta, vartheta, lam))
            lines.append(f"u3({args}) q[{g.qubits[0]}];")
        elif g.kind == CNOT_KIND:
            lines.append(f"cx q[{g.qubits[0]}],q[{g.qubits[1]}];")
        elif g.kind == H_KIND:
            lines.append(f"h q[{g.qubits[0]}];")
        elif g.kind == BARRIER_KIND:
            if not g.qubits or len(g.qubits) == c.n_qubits:
                lines.append("barrier q;")
            else:
                lines.append("barrier " + ",".join(f"q[{q}]" for q in g.qubits) + ";")
        else:
            for k, q in enumerate(g.qubits):
                lines.append(f"measure q[{q}] -> {g.label}[{k}];")
    return "\n".join(lines) + "\n"
