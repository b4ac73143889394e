"""Idle-noise channels: relaxation, pure dephasing and gate-error excitation.

Each qubit evolves under its own single-qubit Liouvillian

    L rho = g1 D[s-] rho + g2 D[sz] rho + gE D[s+] rho,
    D[A] rho = (2 A rho A^dag - A^dag A rho - rho A^dag A) / 2,

with ``s- = |0><1|`` so relaxation drives towards ``|0>``. Superoperators
use the column-stacking convention ``vec(A rho B) = (B^T kron A) vec(rho)``.
Rates are in inverse microseconds and times in microseconds.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable

import numpy as np
from scipy.linalg import expm

from . import kernels
from .errors import ArgumentError, CapacityError, ParameterError
from .qstate import (
    PAULI_Z,
    SIGMA_MINUS,
    SIGMA_PLUS,
    DensityMatrix,
    qubit_subset,
)

BRUTE_FORCE_MAX_QUBITS = 3
MIN_STEPS_PER_US = 1000


@dataclass(frozen=True)
class NoiseParams:
    """Relaxation time ``t1``, dephasing time ``t2`` (us) and excitation rate ``gamma_errors`` (1/us).

    ``per_qubit`` holds ``(qubit, NoiseParams)`` overrides; every other qubit
    uses these values. ``errors_on_measure_only`` restricts the excitation
    term to readout moments.
    """

    t1: float
    t2: float
    gamma_errors: float = 0.0
    enabled: bool = True
    errors_on_measure_only: bool = False
    per_qubit: tuple[tuple[int, "NoiseParams"], ...] = ()

    def __post_init__(self):
        if not (self.t1 > 0 and self.t2 > 0):
            raise ParameterError(f"T1 and T2 must be positive, got T1={self.t1}, T2={self.t2}")
        if self.t2 > 2 * self.t1 and not math.isinf(self.t1):
            raise ParameterError(
                f"T2={self.t2} exceeds 2*T1={2 * self.t1}; the dephasing rate would be negative"
            )
        if not (self.gamma_errors >= 0 and math.isfinite(self.gamma_errors)):
            raise ParameterError(f"gamma_errors must be finite and >= 0, got {self.gamma_errors}")
        object.__setattr__(self, "per_qubit", tuple((int(q), p) for q, p in self.per_qubit))

    @classmethod
    def from_rates(cls, gamma_t1: float, gamma_t2: float, gamma_errors: float = 0.0, **kw) -> "NoiseParams":
        """Invert the rate formulas: ``T1 = 1/gamma_t1``, ``1/T2 = 2 gamma_t2 + gamma_t1/2``."""
        if gamma_t1 < 0 or gamma_t2 < 0:
            raise ParameterError("rates must be non-negative")
        t1 = math.inf if gamma_t1 == 0 else 1.0 / gamma_t1
        inv_t2 = 2.0 * gamma_t2 + gamma_t1 / 2.0
        t2 = math.inf if inv_t2 == 0 else 1.0 / inv_t2
        return cls(t1, t2, gamma_errors, **kw)

    def for_qubit(self, q: int) -> "NoiseParams":
        for k, p in self.per_qubit:
            if k == q:
                return p
        return self

    @property
    def is_uniform(self) -> bool:
        return not self.per_qubit


FITTED_NOISE = NoiseParams(t1=46.0, t2=13.5, gamma_errors=0.085)
NOISELESS = NoiseParams(t1=math.inf, t2=math.inf, gamma_errors=0.0, enabled=False)


def derived_rates(p: NoiseParams) -> tuple[float, float]:
    """``(gamma_t1, gamma_t2) = (1/T1, (1/T2 - 1/(2 T1)) / 2)``."""
    if p.t2 > 2 * p.t1:
        raise ParameterError(f"T2={p.t2} > 2*T1={2 * p.t1}")
    gamma_t1 = 1.0 / p.t1
    gamma_t2 = (1.0 / p.t2 - 1.0 / (2.0 * p.t1)) / 2.0
    # t2 == 2*t1 can leave a rounding residue of either sign
    if abs(gamma_t2) < 1e-15 * max(1.0, gamma_t1):
        gamma_t2 = 0.0
    return gamma_t1, gamma_t2


def dissipator(a: np.ndarray) -> np.ndarray:
    """Superoperator of ``D[a]`` (rate 1) in column-stacked form."""
    a = np.asarray(a, dtype=complex)
    d = a.shape[0]
    eye = np.eye(d)
    ada = a.conj().T @ a
    return np.kron(a.conj(), a) - 0.5 * np.kron(eye, ada) - 0.5 * np.kron(ada.T, eye)


def liouvillian(gamma_t1: float, gamma_t2: float, gamma_errors: float) -> np.ndarray:
    """Single-qubit 4x4 generator combining relaxation, dephasing and excitation."""
    return (
        gamma_t1 * dissipator(SIGMA_MINUS.matrix)
        + gamma_t2 * dissipator(PAULI_Z.matrix)
        + gamma_errors * dissipator(SIGMA_PLUS.matrix)
    )


@dataclass(frozen=True, eq=False)
class IdleChannel:
    """Single-qubit channel for an idle window of ``duration`` microseconds."""

    duration: float
    superoperator: np.ndarray

    def apply_1q(self, rho: np.ndarray) -> np.ndarray:
        vec = self.superoperator @ np.asarray(rho, dtype=complex).reshape(-1, order="F")
        return vec.reshape(2, 2, order="F")

    def choi(self) -> np.ndarray:
        return choi_matrix(self.superoperator)

    def is_cptp(self, tol: float = 1e-10) -> bool:
        return is_cptp(self.superoperator, tol)

    @property
    def is_identity(self) -> bool:
        return np.array_equal(self.superoperator, np.eye(4))


def choi_matrix(superop: np.ndarray) -> np.ndarray:
    """``J = sum_ij |i><j| kron E(|i><j|)`` for a column-stacked superoperator."""
    d = int(round(math.sqrt(superop.shape[0])))
    j = np.zeros((d * d, d * d), dtype=complex)
    for a in range(d):
        for b in range(d):
            e = np.zeros((d, d))
            e[a, b] = 1.0
            out = (superop @ e.reshape(-1, order="F")).reshape(d, d, order="F")
            j[a * d:(a + 1) * d, b * d:(b + 1) * d] = out
    return j


def is_cptp(superop: np.ndarray, tol: float = 1e-10) -> bool:
    d = int(round(math.sqrt(superop.shape[0])))
    j = choi_matrix(superop)
    if np.abs(j - j.conj().T).max() > tol:
        return False
    if np.linalg.eigvalsh(j).min() < -tol:
        return False
    # trace preservation: Tr E(|a><b|) = delta_ab
    tr = np.array([[np.trace(j[a * d:(a + 1) * d, b * d:(b + 1) * d]) for b in range(d)] for a in range(d)])
    return bool(np.abs(tr - np.eye(d)).max() <= tol)


@lru_cache(maxsize=512)
def _channel_superop(gamma_t1: float, gamma_t2: float, gamma_errors: float, duration: float) -> np.ndarray:
    if duration == 0:
        s = np.eye(4, dtype=complex)
    else:
        s = expm(duration * liouvillian(gamma_t1, gamma_t2, gamma_errors))
    s.setflags(write=False)
    return s


def idle_channel(p: NoiseParams, duration: float, include_errors: bool = True) -> IdleChannel:
    """``exp(duration * L)`` for the uniform rates of ``p``.

    ``include_errors=False`` drops the excitation term (used outside readout
    moments when ``errors_on_measure_only`` is set). Results are cached per
    (rates, duration).
    """
    if not duration >= 0:
        raise ArgumentError(f"idle duration must be >= 0, got {duration}")
    if not p.enabled:
        return IdleChannel(float(duration), _channel_superop(0.0, 0.0, 0.0, 0.0))
    g1, g2 = derived_rates(p)
    ge = p.gamma_errors if include_errors else 0.0
    return IdleChannel(float(duration), _channel_superop(g1, g2, ge, float(duration)))


def apply_idle_noise_inplace(mat: np.ndarray, superop: np.ndarray, positions: Iterable[int]) -> None:
    n = mat.shape[0].bit_length() - 1
    for q in positions:
        kernels.apply_1q_superop(mat, n, q, superop)


def apply_idle_noise(rho: DensityMatrix, channel: IdleChannel, qubits: Iterable[int]) -> DensityMatrix:
    """Apply ``channel`` independently to each of ``qubits``."""
    qubits = qubit_subset(qubits, rho.n_qubits)
    if channel.is_identity or not qubits:
        return rho
    mat = rho.matrix.copy()
    apply_idle_noise_inplace(mat, np.ascontiguousarray(channel.superoperator), qubits)
    return DensityMatrix(mat, check=False)


# --- reference integrator ---------------------------------------------------


def _embed(op: np.ndarray, q: int, n: int) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for k in range(n):
        out = np.kron(out, op if k == q else np.eye(2))
    return out


def _full_lindblad_terms(p: NoiseParams, n: int) -> list[tuple[float, np.ndarray]]:
    terms = []
    for q in range(n):
        g1, g2 = derived_rates(p.for_qubit(q))
        ge = p.for_qubit(q).gamma_errors
        for rate, op in ((g1, SIGMA_MINUS), (g2, PAULI_Z), (ge, SIGMA_PLUS)):
            if rate:
                terms.append((rate, _embed(op.matrix, q, n)))
    return terms


def brute_force_evolve(
    rho: DensityMatrix,
    p: NoiseParams,
    duration: float,
    steps_per_us: int = 2000,
) -> DensityMatrix:
    """Fixed-step RK4 integration of the full-register master equation.

    Independent of :func:`idle_channel`: builds every Lindblad operator on
    the whole register and integrates ``d rho/dt`` directly. Small
    registers only.
    """
    n = rho.n_qubits
    if n > BRUTE_FORCE_MAX_QUBITS:
        raise CapacityError(f"brute-force integration is limited to {BRUTE_FORCE_MAX_QUBITS} qubits")
    if duration < 0:
        raise ArgumentError("duration must be >= 0")
    if steps_per_us < MIN_STEPS_PER_US:
        raise ArgumentError(f"need at least {MIN_STEPS_PER_US} steps per microsecond")
    if duration == 0 or not p.enabled:
        return rho
    terms = _full_lindblad_terms(p, n)
    pre = [(g, a, a.conj().T, a.conj().T @ a) for g, a in terms]

    def rhs(r):
        out = np.zeros_like(r)
        for g, a, ad, ada in pre:
            out += g * (a @ r @ ad - 0.5 * (ada @ r + r @ ada))
        return out

    steps = max(1, math.ceil(duration * steps_per_us))
    h = duration / steps
    r = rho.matrix.copy()
    for _ in range(steps):
        k1 = rhs(r)
        k2 = rhs(r + 0.5 * h * k1)
        k3 = rhs(r + 0.5 * h * k2)
        k4 = rhs(r + h * k3)
        r = r + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    return DensityMatrix(r, check=False)
