"""Witness, invasiveness and macroscopicity protocols.

Distributions are plain ``dict[str, float]`` keyed by outcome bit-strings
(qubit 0 leftmost). Exact mode reads probabilities straight off the
simulated density matrices; sampled mode draws multinomial shot counts on
top of them.
"""
from __future__ import annotations

import itertools
import math
import os
import warnings
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from .circuits import (
    Circuit,
    GateDurations,
    Measure,
    attach_ancilla_measurement,
    blind_circuit,
    direct_measure_circuit,
    prepare_measure_circuits,
)
from .errors import ArgumentError, CapacityError
from .noise import NoiseParams
from .qstate import DensityMatrix, all_bitstrings, partial_trace_matrix, von_neumann_entropy
from .simulator import conditional, distribution_from, simulate

DEFAULT_PRUNE_FLOOR = 1e-3
DEFAULT_ETA = 0.5
DEFAULT_SHOTS = 8192
# largest system register for the ancilla-based scenario (6 system + 6 ancillas)
DIRECT_MEASURE_MAX_SYSTEM = 6
DISCONNECTIVITY_EXHAUSTIVE_MAX = 8

NON_MACROREALISTIC = "non-macrorealistic"
CLUMSY_COMPATIBLE = "compatible with clumsy-macrorealism"

Distribution = dict[str, float]


def _direct_measure_limit() -> int:
    value = os.environ.get("MACROWITNESS_MAX_QUBITS")
    if value:
        return int(value) // 2
    return DIRECT_MEASURE_MAX_SYSTEM


def _seed_sequence(seed) -> np.random.SeedSequence:
    return seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)


# --- result records ---------------------------------------------------------


@dataclass(frozen=True)
class MeasuredRun:
    """Outcome statistics of a run with a measurement at t1.

    ``joint[(i, j)]`` is the probability of ``i`` at t1 followed by ``j`` at
    t2, ``conditional[i][j]`` is ``p(j | i)`` and ``p_m`` is the t2 marginal
    ``sum_i p_t1(i) p(j | i)``. ``complete`` is false when branches were
    dropped by a prune floor.
    """

    p_t1: Distribution
    joint: dict[tuple[str, str], float]
    conditional: dict[str, Distribution]
    p_m: Distribution
    complete: bool = True


@dataclass(frozen=True)
class WitnessResult:
    w: float
    sigma: float
    p_blind: Distribution
    p_with_measurement: Distribution
    joint: dict[tuple[str, str], float]
    target_outcome: str
    shots: int | str = "exact"
    scenario: str = "direct"
    complete: bool = True


@dataclass(frozen=True)
class InvasivenessRecord:
    prepared_state: str
    epsilon_ii: float
    invasiveness: float
    sigma: float = 0.0


@dataclass(frozen=True)
class DisconnectivityReport:
    gamma: int
    deltas: dict[int, float]
    eta: float
    partition_strategy: str


@dataclass(frozen=True)
class SampleResult:
    counts: dict[str, int]
    empirical: Distribution
    sigma: dict[str, float]
    shots: int


# --- simulation runs --------------------------------------------------------


def _check_prep(n: int, prep: Circuit) -> None:
    if prep.n_qubits != n:
        raise ArgumentError(f"preparation circuit has {prep.n_qubits} qubits, expected {n}")
    if prep.has_measure:
        raise ArgumentError("preparation circuit must not contain Measure gates")


def run_blind(
    n: int,
    prep: Circuit,
    noise: NoiseParams | None = None,
    durations: GateDurations | None = None,
    initial: str | None = None,
) -> Distribution:
    """t2 distribution of prep, Barrier, prep^dagger without an intermediate measurement."""
    _check_prep(n, prep)
    res = simulate(blind_circuit(prep), noise, durations, initial)
    return distribution_from(res, "final", n)


def run_direct_measure(
    n: int,
    prep: Circuit,
    noise: NoiseParams | None = None,
    durations: GateDurations | None = None,
    serial_ancilla: bool = False,
    initial: str | None = None,
) -> MeasuredRun:
    """Intermediate measurement by CNOT fan-out onto ``n`` fresh ancillas.

    Every ancilla outcome ``i`` is followed as its own branch, so ``joint``
    and ``conditional`` are exact.
    """
    _check_prep(n, prep)
    if n > _direct_measure_limit():
        raise CapacityError(
            f"direct-measure with {n} system qubits needs {2 * n} qubits; "
            f"the limit is {_direct_measure_limit()} + {_direct_measure_limit()}"
        )
    circuit = direct_measure_circuit(prep, serial=serial_ancilla)
    start = (initial or "0" * n) + "0" * n
    res = simulate(circuit, noise, durations, start)
    joint = {(i, j): p for (i, j), p in res.joint(["mid", "final"]).items()}
    p_t1 = distribution_from(res, "mid", n)
    p_m = distribution_from(res, "final", n)
    return MeasuredRun(p_t1, joint, conditional(joint), p_m)


def run_prepare_and_measure(
    n: int,
    prep: Circuit,
    noise: NoiseParams | None = None,
    durations: GateDurations | None = None,
    prune_floor: float = DEFAULT_PRUNE_FLOOR,
    initial: str | None = None,
) -> MeasuredRun:
    """Intermediate measurement traded for re-preparation.

    A first run measures right after ``prep`` to get ``p_t1``; each outcome
    with ``p_t1(i) >= prune_floor`` then seeds a fresh run that starts in
    ``|i>`` and applies ``prep^dagger``. Dropped outcomes make the
    combination incomplete, which is flagged and warned about.
    """
    _check_prep(n, prep)
    first, second = prepare_measure_circuits(prep)
    res = simulate(first, noise, durations, initial)
    p_t1 = distribution_from(res, "mid", n)
    joint: dict[tuple[str, str], float] = {}
    cond: dict[str, Distribution] = {}
    kept = 0.0
    for i, p in p_t1.items():
        if p <= 0 or p < prune_floor:
            continue
        kept += p
        final = distribution_from(simulate(second(i, with_preparation=False), noise, durations, i), "final", n)
        cond[i] = final
        for j, q in final.items():
            if q > 0:
                joint[(i, j)] = p * q
    complete = abs(kept - 1.0) <= 1e-9
    if not complete:
        warnings.warn(
            f"prepare-and-measure dropped t1 outcomes carrying probability {1.0 - kept:.3g}; "
            "the combined t2 distribution is incomplete",
            RuntimeWarning,
            stacklevel=2,
        )
    p_m = {j: 0.0 for j in all_bitstrings(n)}
    for (_, j), p in joint.items():
        p_m[j] += p
    return MeasuredRun(p_t1, joint, cond, p_m, complete)


# --- witness ------------------------------------------------------------------


def analytic_cat_witness(theta: float) -> float:
    """Noiseless cat-state witness ``1 - cos^4(theta/2) - sin^4(theta/2)``."""
    c2 = math.cos(theta / 2) ** 2
    s2 = math.sin(theta / 2) ** 2
    return 1.0 - c2 * c2 - s2 * s2


def binomial_sigma(p: float, shots: int) -> float:
    return math.sqrt(max(p * (1.0 - p), 0.0) / shots)


def quantum_witness(
    p_blind: Mapping[str, float],
    p_with_measurement: Mapping[str, float],
    j: str | None = None,
    joint: Mapping[tuple[str, str], float] | None = None,
    shots: int | str = "exact",
    sigma: float | None = None,
) -> WitnessResult:
    """``W = |p_blind(j) - p_with_measurement(j)|``.

    With integer ``shots`` and no explicit ``sigma`` the uncertainty is the
    quadrature sum of the two binomial errors ``sqrt(p (1 - p) / shots)``.
    ``j`` defaults to the all-zeros outcome.
    """
    if set(p_blind) != set(p_with_measurement):
        raise ArgumentError("the two distributions have different outcome spaces")
    if j is None:
        j = "0" * len(next(iter(p_blind)))
    if j not in p_blind:
        raise ArgumentError(f"outcome {j!r} is not in the outcome space")
    pb, pm = p_blind[j], p_with_measurement[j]
    w = abs(pb - pm)
    if sigma is None:
        sigma = 0.0
        if shots != "exact":
            sigma = math.hypot(binomial_sigma(pb, int(shots)), binomial_sigma(pm, int(shots)))
    return WitnessResult(
        w=w,
        sigma=sigma,
        p_blind=dict(p_blind),
        p_with_measurement=dict(p_with_measurement),
        joint=dict(joint or {}),
        target_outcome=j,
        shots=shots,
    )


def sample_counts(dist: Mapping[str, float], shots: int, seed=None) -> SampleResult:
    """Multinomial draw of ``shots`` outcomes; deterministic for a fixed seed.

    ``seed`` is anything :func:`numpy.random.default_rng` accepts (including
    a ``SeedSequence`` or a ``Generator``).
    """
    if shots < 1:
        raise ArgumentError("shots must be >= 1")
    keys = sorted(dist)
    probs = np.array([dist[k] for k in keys], dtype=float)
    if np.any(probs < -1e-12) or abs(probs.sum() - 1.0) > 1e-9:
        raise ArgumentError(f"distribution sums to {probs.sum()!r}, expected 1")
    probs = np.clip(probs, 0.0, None)
    probs /= probs.sum()
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    draw = rng.multinomial(shots, probs)
    counts = {k: int(c) for k, c in zip(keys, draw)}
    empirical = {k: c / shots for k, c in counts.items()}
    sigma = {k: binomial_sigma(p, shots) for k, p in empirical.items()}
    return SampleResult(counts, empirical, sigma, shots)


def _sampled_prepare_measure(run: MeasuredRun, shots: int, rng_t1, rng_cond, j: str):
    t1 = sample_counts(run.p_t1, shots, rng_t1)
    n = len(j)
    p_m = {k: 0.0 for k in all_bitstrings(n)}
    var_j = 0.0
    joint = {}
    for i, cond in sorted(run.conditional.items()):
        s = sample_counts(cond, shots, rng_cond)
        pi = t1.empirical[i]
        for k, q in s.empirical.items():
            p_m[k] += pi * q
            if pi * q > 0:
                joint[(i, k)] = pi * q
        # first-order propagation, t1 and conditional runs independent
        var_j += (s.empirical[j] * t1.sigma[i]) ** 2 + (pi * s.sigma[j]) ** 2
    return p_m, joint, math.sqrt(var_j)


def witness_experiment(
    prep: Circuit,
    noise: NoiseParams | None = None,
    durations: GateDurations | None = None,
    scenario: str = "direct",
    shots: int | str = "exact",
    seed=None,
    serial_ancilla: bool = False,
    j: str | None = None,
    prune_floor: float = DEFAULT_PRUNE_FLOOR,
) -> WitnessResult:
    """Blind run plus measured run (``"direct"`` or ``"prepare-measure"``) combined into W.

    In sampled mode the blind and measured runs draw from independent
    child seeds of ``seed``.
    """
    n = prep.n_qubits
    j = j or "0" * n
    p_blind = run_blind(n, prep, noise, durations)
    if scenario == "direct":
        run = run_direct_measure(n, prep, noise, durations, serial_ancilla)
    elif scenario in ("prepare-measure", "pm"):
        scenario = "prepare-measure"
        run = run_prepare_and_measure(n, prep, noise, durations, prune_floor)
    else:
        raise ArgumentError(f"unknown scenario {scenario!r}")

    if shots == "exact":
        res = quantum_witness(p_blind, run.p_m, j, run.joint)
        return replace(res, scenario=scenario, complete=run.complete)

    shots = int(shots)
    ss_blind, ss_meas, ss_cond = _seed_sequence(seed).spawn(3)
    blind = sample_counts(p_blind, shots, ss_blind)
    if scenario == "direct":
        joint_keys = {f"{i}|{k}": p for (i, k), p in run.joint.items()}
        s = sample_counts(joint_keys, shots, ss_meas)
        p_m = {k: 0.0 for k in all_bitstrings(n)}
        joint = {}
        for key, p in s.empirical.items():
            i, k = key.split("|")
            p_m[k] += p
            if p > 0:
                joint[(i, k)] = p
        res = quantum_witness(blind.empirical, p_m, j, joint, shots)
    else:
        p_m, joint, sigma_m = _sampled_prepare_measure(
            run, shots, np.random.default_rng(ss_meas), np.random.default_rng(ss_cond), j
        )
        sigma = math.hypot(blind.sigma[j], sigma_m)
        res = quantum_witness(blind.empirical, p_m, j, joint, shots, sigma=sigma)
    return replace(res, scenario=scenario, complete=run.complete)


# --- invasiveness -------------------------------------------------------------


def invasiveness_test(
    i: str,
    n: int,
    noise: NoiseParams | None = None,
    durations: GateDurations | None = None,
    serial_ancilla: bool = False,
    context: Circuit | None = None,
    shots: int | str = "exact",
    seed=None,
) -> InvasivenessRecord:
    """Survival of the basis state ``i`` under the ancilla readout block.

    Without ``context`` the system starts exactly in ``|i>``, the fan-out
    CNOTs and ancilla readout run under noise, and the system is read out
    immediately afterwards: ``epsilon_ii = p(i)``.

    With a preparation circuit as ``context`` the readout block is embedded
    in the same schedule as the witness (prep, readout, prep^dagger) and the
    survival is measured against the same schedule without the readout:
    ``epsilon_ii = 1 - (p_blind(i) - p_measured(i))``. For a preparation
    that leaves ``|i>`` classical this reproduces the witness circuit
    gate for gate.
    """
    if len(i) != n or any(b not in "01" for b in i):
        raise ArgumentError(f"prepared state {i!r} is not an {n}-bit string")
    if n > _direct_measure_limit():
        raise CapacityError(f"invasiveness test with {n} system qubits exceeds the ancilla limit")
    if context is None:
        c = attach_ancilla_measurement(Circuit(2 * n), range(n), range(n, 2 * n), serial=serial_ancilla)
        c = c.with_gates(Measure(range(n), "final"))
        res = simulate(c, noise, durations, i + "0" * n)
        final = distribution_from(res, "final", n)
        eps = final[i]
        if shots != "exact":
            eps = sample_counts(final, int(shots), seed).empirical[i]
            return InvasivenessRecord(i, eps, abs(1.0 - eps), binomial_sigma(eps, int(shots)))
        return InvasivenessRecord(i, eps, abs(1.0 - eps), 0.0)

    p_b = run_blind(n, context, noise, durations, initial=i)
    p_m = run_direct_measure(n, context, noise, durations, serial_ancilla, initial=i).p_m
    sigma = 0.0
    if shots != "exact":
        ss_b, ss_m = _seed_sequence(seed).spawn(2)
        p_b = sample_counts(p_b, int(shots), ss_b).empirical
        p_m = sample_counts(p_m, int(shots), ss_m).empirical
        sigma = math.hypot(binomial_sigma(p_b[i], int(shots)), binomial_sigma(p_m[i], int(shots)))
    diff = p_b[i] - p_m[i]
    return InvasivenessRecord(i, 1.0 - diff, abs(diff), sigma)


def invasiveness_sweep(
    n: int,
    noise: NoiseParams | None = None,
    durations: GateDurations | None = None,
    serial_ancilla: bool = False,
    states: Sequence[str] | None = None,
) -> list[InvasivenessRecord]:
    """Invasiveness of every computational basis state (or of ``states``)."""
    states = list(states) if states is not None else all_bitstrings(n)
    return [invasiveness_test(s, n, noise, durations, serial_ancilla) for s in states]


def clumsy_bound(records: Sequence[InvasivenessRecord]) -> float:
    """``max_i I(i)``: the largest witness clumsy measurements alone can produce."""
    if not records:
        raise ArgumentError("clumsy_bound needs at least one invasiveness record")
    return max(r.invasiveness for r in records)


def verdict(w: float | WitnessResult, bound: float) -> str:
    """``"non-macrorealistic"`` when the witness exceeds the bound, else clumsy-compatible."""
    value = w.w if isinstance(w, WitnessResult) else float(w)
    return NON_MACROREALISTIC if value > bound else CLUMSY_COMPATIBLE


# --- macroscopicity and dimension ------------------------------------------------


def _entropy_of(mat: np.ndarray, subset: tuple[int, ...], cache: dict) -> float:
    if subset not in cache:
        cache[subset] = von_neumann_entropy(partial_trace_matrix(mat, subset))
    return cache[subset]


def _delta(s_whole: float, denominator: float, tol: float = 1e-12) -> float:
    if denominator <= tol:
        return 1.0 if s_whole <= tol else math.inf
    return s_whole / denominator


def disconnectivity(
    state: DensityMatrix,
    eta: float = DEFAULT_ETA,
    strategy: str = "prefix",
    tol: float = 1e-9,
) -> DisconnectivityReport:
    """Largest ``n'`` whose entropy ratio ``delta_n'`` falls below ``eta``.

    ``delta_n' = S(A) / min_m [S(B_m) + S(A \\ B_m)]`` for an ``n'``-qubit
    group ``A`` split into two parts. ``"prefix"`` uses ``A = {0..n'-1}``
    split at each cut point; ``"exhaustive"`` tries every ``n'``-subset and
    every bipartition of it and keeps the largest ratio. ``delta_1 = 0`` and
    ``0/0`` counts as 1. A ratio must be below ``eta - tol`` to count.
    """
    if not 0 < eta <= 1:
        raise ArgumentError(f"eta must be in (0, 1], got {eta}")
    n = state.n_qubits
    mat = state.matrix
    cache: dict = {}
    deltas: dict[int, float] = {1: 0.0}
    if strategy == "prefix":
        for k in range(2, n + 1):
            group = tuple(range(k))
            s_k = _entropy_of(mat, group, cache)
            den = min(
                _entropy_of(mat, group[:m], cache) + _entropy_of(mat, group[m:], cache)
                for m in range(1, k)
            )
            deltas[k] = _delta(s_k, den)
    elif strategy == "exhaustive":
        if n > DISCONNECTIVITY_EXHAUSTIVE_MAX:
            raise CapacityError(f"exhaustive disconnectivity is limited to {DISCONNECTIVITY_EXHAUSTIVE_MAX} qubits")
        for k in range(2, n + 1):
            worst = -math.inf
            for group in itertools.combinations(range(n), k):
                s_k = _entropy_of(mat, group, cache)
                den = math.inf
                for r in range(1, k // 2 + 1):
                    for part in itertools.combinations(group, r):
                        rest = tuple(q for q in group if q not in part)
                        den = min(den, _entropy_of(mat, part, cache) + _entropy_of(mat, rest, cache))
                worst = max(worst, _delta(s_k, den))
            deltas[k] = worst
    else:
        raise ArgumentError(f"unknown partition strategy {strategy!r}")
    below = [k for k, d in deltas.items() if k >= 2 and d < eta - tol]
    gamma = max(below) if below else 1
    return DisconnectivityReport(gamma, deltas, eta, strategy)


def w_max(d: int) -> float:
    """Largest witness reachable when the intermediate measurement resolves ``d`` states."""
    if d < 1:
        raise ArgumentError("dimension must be >= 1")
    return 1.0 - 1.0 / d


def dimension_estimate(w: float, tol: float = 1e-9) -> int:
    """``floor(1 / (1 - w))``, the number of states the witness certifies.

    ``tol`` is a relative slack that absorbs rounding, so ``w = 1 - 1/d``
    computed in floating point still yields ``d``.
    """
    if not w < 1:
        raise ArgumentError(f"witness {w} must be below 1")
    if w < 0:
        raise ArgumentError(f"witness {w} must be non-negative")
    x = 1.0 / (1.0 - w)
    return int(math.floor(x + tol * max(1.0, x)))
