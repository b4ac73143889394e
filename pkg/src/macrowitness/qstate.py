"""Dense operators and density matrices on qubit registers.

Basis convention: qubit 0 is the leftmost character of an outcome label and
the most significant bit of a basis index, so ``kron(a, b)`` puts ``a`` on
the lower-numbered qubits.
"""
from __future__ import annotations

import itertools
import os
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ArgumentError, CapacityError, StateValidityError

DEFAULT_MAX_QUBITS = 14

HERMITIAN_TOL = 1e-10
TRACE_TOL = 1e-10
PSD_TOL = 1e-9
UNITARY_TOL = 1e-12
# PSD check needs a full eigendecomposition; skip it above this size.
PSD_CHECK_MAX_QUBITS = 8


def max_qubits() -> int:
    """Capacity ceiling, overridable with ``MACROWITNESS_MAX_QUBITS``."""
    value = os.environ.get("MACROWITNESS_MAX_QUBITS")
    if value:
        return int(value)
    return DEFAULT_MAX_QUBITS


def check_capacity(n: int) -> None:
    limit = max_qubits()
    if n > limit:
        raise CapacityError(f"{n} qubits exceeds the capacity ceiling of {limit}")


def _n_from_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 1 or (1 << n) != dim:
        raise ArgumentError(f"dimension {dim} is not a power of two")
    return n


def qubit_subset(indices: Iterable[int], n: int) -> tuple[int, ...]:
    """Validate ``indices`` against an ``n``-qubit register and return them sorted."""
    idx = [int(i) for i in indices]
    if len(set(idx)) != len(idx):
        raise ArgumentError(f"duplicate qubit indices in {idx}")
    for i in idx:
        if not 0 <= i < n:
            raise ArgumentError(f"qubit index {i} out of range for {n} qubits")
    return tuple(sorted(idx))


def bits_to_index(bits: str) -> int:
    return int(bits, 2) if bits else 0


def index_to_bits(index: int, n: int) -> str:
    return format(index, f"0{n}b") if n else ""


def all_bitstrings(n: int) -> list[str]:
    return ["".join(b) for b in itertools.product("01", repeat=n)]


@dataclass(frozen=True, eq=False)
class Operator:
    """A dense 2^k x 2^k complex matrix, optionally flagged unitary."""

    matrix: np.ndarray
    unitary: bool = False

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ArgumentError(f"operator must be square, got shape {m.shape}")
        _n_from_dim(m.shape[0])
        if self.unitary:
            err = np.linalg.norm(m.conj().T @ m - np.eye(m.shape[0]))
            if err > UNITARY_TOL:
                raise ArgumentError(f"operator flagged unitary but |U^dag U - 1| = {err:.3e}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return _n_from_dim(self.dim)

    def dagger(self) -> "Operator":
        return Operator(self.matrix.conj().T, unitary=self.unitary)

    def __matmul__(self, other: "Operator") -> "Operator":
        return Operator(self.matrix @ other.matrix, unitary=self.unitary and other.unitary)


def u3(lam: float, vartheta: float, theta: float) -> Operator:
    """Single-qubit rotation with the (lambda, vartheta, theta) argument order.

    Matrix ``[[cos t/2, -e^{i lam} sin t/2], [e^{i vartheta} sin t/2,
    e^{i(lam + vartheta)} cos t/2]]``; ``u3(0, 0, theta)`` is a real Y rotation.
    """
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    m = np.array(
        [
            [c, -np.exp(1j * lam) * s],
            [np.exp(1j * vartheta) * s, np.exp(1j * (lam + vartheta)) * c],
        ]
    )
    return Operator(m, unitary=True)


IDENTITY = Operator(np.eye(2), unitary=True)
PAULI_X = Operator(np.array([[0, 1], [1, 0]]), unitary=True)
PAULI_Z = Operator(np.diag([1, -1]), unitary=True)
HADAMARD = Operator(np.array([[1, 1], [1, -1]]) / np.sqrt(2), unitary=True)
# control is the first (most significant) tensor factor
CNOT = Operator(
    np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]), unitary=True
)
SIGMA_MINUS = Operator(np.array([[0, 1], [0, 0]]))  # |0><1|
SIGMA_PLUS = Operator(np.array([[0, 0], [1, 0]]))  # |1><0|


def kron(a: Operator, b: Operator) -> Operator:
    """Tensor product with ``a`` varying slowest."""
    check_capacity(a.n_qubits + b.n_qubits)
    return Operator(np.kron(a.matrix, b.matrix), unitary=a.unitary and b.unitary)


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    """Immutable density matrix on ``n_qubits`` qubits.

    Construction checks Hermiticity and unit trace; positivity is checked
    by eigendecomposition for registers up to ``PSD_CHECK_MAX_QUBITS``.
    Pass ``check=False`` to skip validation for internally produced states.
    """

    matrix: np.ndarray
    check: bool = True

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex, order="C")
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise StateValidityError(f"density matrix must be square, got {m.shape}")
        n = _n_from_dim(m.shape[0])
        check_capacity(n)
        if self.check:
            _validate_state(m, n)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n_qubits(self) -> int:
        return _n_from_dim(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def from_statevector(cls, psi: Sequence[complex]) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        psi = psi / np.linalg.norm(psi)
        return cls(np.outer(psi, psi.conj()))

    @classmethod
    def basis(cls, bits: str) -> "DensityMatrix":
        """The computational basis state ``|bits><bits|``."""
        if any(b not in "01" for b in bits) or not bits:
            raise ArgumentError(f"invalid bit-string {bits!r}")
        check_capacity(len(bits))
        m = np.zeros((1 << len(bits),) * 2, dtype=complex)
        i = bits_to_index(bits)
        m[i, i] = 1.0
        return cls(m, check=False)

    @classmethod
    def maximally_mixed(cls, n: int) -> "DensityMatrix":
        return cls(np.eye(1 << n) / (1 << n), check=False)

    def probabilities(self) -> np.ndarray:
        """Computational-basis populations, clipped at zero."""
        return np.clip(self.matrix.diagonal().real, 0.0, None)

    def distribution(self) -> dict[str, float]:
        n = self.n_qubits
        return {index_to_bits(i, n): float(p) for i, p in enumerate(self.probabilities())}

    def trace_distance(self, other: "DensityMatrix") -> float:
        ev = np.linalg.eigvalsh(self.matrix - other.matrix)
        return 0.5 * float(np.abs(ev).sum())

    def tensor(self, other: "DensityMatrix") -> "DensityMatrix":
        check_capacity(self.n_qubits + other.n_qubits)
        return DensityMatrix(np.kron(self.matrix, other.matrix), check=False)


def _validate_state(m: np.ndarray, n: int) -> None:
    herm = np.abs(m - m.conj().T).max()
    if herm > HERMITIAN_TOL:
        raise StateValidityError(f"matrix is not Hermitian (max deviation {herm:.3e})")
    tr = np.trace(m).real
    if abs(tr - 1.0) > TRACE_TOL:
        raise StateValidityError(f"trace is {tr!r}, expected 1")
    if n <= PSD_CHECK_MAX_QUBITS:
        lo = np.linalg.eigvalsh(m).min()
        if lo < -PSD_TOL:
            raise StateValidityError(f"minimum eigenvalue {lo:.3e} is negative")


def _as_matrix(rho) -> np.ndarray:
    return rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho, dtype=complex)


def apply_local_unitary_inplace(mat: np.ndarray, u: np.ndarray, targets: Sequence[int]) -> np.ndarray:
    """Apply ``u`` to ``targets`` of a writable C-contiguous matrix.

    One- and two-qubit gates that match a kernel run in place; anything else
    goes through a tensor contraction and a new array is returned.
    """
    n = _n_from_dim(mat.shape[0])
    k = len(targets)
    if k == 1:
        kernels.apply_1q(mat, n, targets[0], np.ascontiguousarray(u, dtype=complex))
        return mat
    if k == 2 and np.array_equal(u, CNOT.matrix):
        kernels.apply_cnot(mat, n, targets[0], targets[1])
        return mat
    return _contract(mat, u, targets, n)


def _contract(mat: np.ndarray, u: np.ndarray, targets: Sequence[int], n: int) -> np.ndarray:
    k = len(targets)
    ut = np.asarray(u, dtype=complex).reshape((2,) * (2 * k))
    t = mat.reshape((2,) * (2 * n))
    # U on the row indices
    t = np.tensordot(ut, t, axes=(list(range(k, 2 * k)), list(targets)))
    t = np.moveaxis(t, list(range(k)), list(targets))
    # U^dagger on the column indices: contract rho[..., b] with conj(U)[a, b]
    col_axes = [n + q for q in targets]
    t = np.tensordot(t, ut.conj(), axes=(col_axes, list(range(k, 2 * k))))
    t = np.moveaxis(t, list(range(2 * n - k, 2 * n)), col_axes)
    return np.ascontiguousarray(t.reshape(mat.shape))


def apply_local_unitary(rho: DensityMatrix, u: Operator, targets: Sequence[int]) -> DensityMatrix:
    """Return ``U rho U^dagger`` with ``u`` acting on ``targets`` (in ``u``'s factor order)."""
    n = rho.n_qubits
    targets = [int(q) for q in targets]
    qubit_subset(targets, n)
    if not u.unitary:
        raise ArgumentError("operator is not flagged unitary")
    if u.dim != 1 << len(targets):
        raise ArgumentError(f"operator of dim {u.dim} cannot act on {len(targets)} qubits")
    out = apply_local_unitary_inplace(rho.matrix.copy(), u.matrix, targets)
    return DensityMatrix(out, check=False)


def partial_trace_matrix(mat: np.ndarray, keep: Sequence[int]) -> np.ndarray:
    n = _n_from_dim(mat.shape[0])
    keep = sorted(keep)
    traced = [q for q in range(n) if q not in keep]
    if not traced:
        return mat.copy()
    letters = [chr(ord("a") + i) for i in range(n)] + [chr(ord("A") + i) for i in range(n)]
    rows = letters[:n]
    cols = [rows[q] if q in traced else letters[n + q] for q in range(n)]
    out = [rows[q] for q in keep] + [cols[q] for q in keep]
    expr = "".join(rows) + "".join(cols) + "->" + "".join(out)
    t = np.einsum(expr, mat.reshape((2,) * (2 * n)))
    d = 1 << len(keep)
    return np.ascontiguousarray(t.reshape(d, d))


def partial_trace(rho: DensityMatrix, keep: Iterable[int]) -> DensityMatrix:
    """Reduced state on ``keep``, tracing out every other qubit."""
    keep = qubit_subset(keep, rho.n_qubits)
    if not keep:
        raise ArgumentError("partial_trace needs a nonempty set of qubits to keep")
    return DensityMatrix(partial_trace_matrix(rho.matrix, keep), check=False)


ENTROPY_EIG_FLOOR = 1e-12


def von_neumann_entropy(rho) -> float:
    """Entropy ``-Tr rho ln rho`` in nats."""
    m = _as_matrix(rho)
    herm = np.abs(m - m.conj().T).max()
    if herm > HERMITIAN_TOL:
        raise StateValidityError(f"entropy of a non-Hermitian matrix (deviation {herm:.3e})")
    ev = np.clip(np.linalg.eigvalsh(m), 0.0, 1.0)
    ev = ev[ev > ENTROPY_EIG_FLOOR]
    # + 0.0 turns a pure state's -0.0 into 0.0
    return float(-(ev * np.log(ev)).sum()) + 0.0


@dataclass(frozen=True)
class MeasurementOutcome:
    """One branch of a computational-basis measurement.

    ``state`` is the renormalised post-measurement state on the full
    register, or ``None`` when the outcome has zero probability.
    """

    label: str
    probability: float
    state: DensityMatrix | None


def _diagonal_block_index(targets, bits, n):
    idx: list = [slice(None)] * (2 * n)
    for q, b in zip(targets, bits):
        idx[q] = int(b)
        idx[n + q] = int(b)
    return tuple(idx)


def outcome_block(mat: np.ndarray, targets: Sequence[int], bits: str) -> np.ndarray:
    """Unnormalised state of the unmeasured qubits given ``bits`` on ``targets``.

    Equals ``Tr_targets[(1 (x) |bits><bits|) rho]`` with the remaining
    qubits kept in ascending order.
    """
    n = _n_from_dim(mat.shape[0])
    block = mat.reshape((2,) * (2 * n))[_diagonal_block_index(targets, bits, n)]
    d = 1 << (n - len(targets))
    return np.ascontiguousarray(block.reshape(d, d))


def outcome_probabilities(mat: np.ndarray, targets: Sequence[int]) -> dict[str, float]:
    """Marginal distribution of ``targets`` (in the given order) from the diagonal."""
    n = _n_from_dim(mat.shape[0])
    diag = np.clip(mat.diagonal().real, 0.0, None).reshape((2,) * n)
    others = tuple(q for q in range(n) if q not in targets)
    marg = diag.sum(axis=others) if others else diag
    # axes of ``marg`` are the targets in ascending order
    order = [sorted(targets).index(q) for q in targets]
    marg = np.transpose(marg, order) if len(order) > 1 else marg
    flat = np.asarray(marg).reshape(-1)
    k = len(targets)
    return {index_to_bits(i, k): float(p) for i, p in enumerate(flat)}


def measure_computational(
    rho: DensityMatrix,
    targets: Iterable[int],
    floor: float = 0.0,
    prune: bool = False,
) -> list[MeasurementOutcome]:
    """Projective measurement of ``targets`` in the computational basis.

    Outcome labels list the targets in ascending qubit order. Zero-probability
    outcomes carry ``state=None``; outcomes below ``floor`` are dropped only
    when ``prune`` is true.
    """
    n = rho.n_qubits
    targets = qubit_subset(targets, n)
    if not targets:
        raise ArgumentError("no qubits to measure")
    probs = outcome_probabilities(rho.matrix, targets)
    total = sum(probs.values())
    t = rho.matrix.reshape((2,) * (2 * n))
    results = []
    for label, p in probs.items():
        p = p / total
        if prune and p < floor:
            continue
        if p <= 0.0:
            results.append(MeasurementOutcome(label, 0.0, None))
            continue
        post = np.zeros_like(t)
        idx = _diagonal_block_index(targets, label, n)
        post[idx] = t[idx]
        post = post.reshape(rho.matrix.shape) / (p * total)
        results.append(MeasurementOutcome(label, p, DensityMatrix(post, check=False)))
    return results
