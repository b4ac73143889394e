"""Noisy density-matrix simulation of quantum-witness tests of macrorealism."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ArgumentError,
    CapacityError,
    MacrowitnessError,
    ParameterError,
    StateValidityError,
)
from .kernels import BACKEND, available_backends  # noqa: E402
from .qstate import (  # noqa: E402
    CNOT as CNOT_OP,
    HADAMARD,
    DensityMatrix,
    Operator,
    apply_local_unitary,
    kron,
    max_qubits,
    measure_computational,
    partial_trace,
    u3,
    von_neumann_entropy,
)
from .circuits import (  # noqa: E402
    CNOT,
    H,
    U3,
    Barrier,
    Circuit,
    GateDurations,
    Measure,
    attach_ancilla_measurement,
    basis_preparation_circuit,
    cat_preparation_circuit,
    inverse_circuit,
    product_preparation_circuit,
    schedule,
    to_qasm,
)
from .noise import (  # noqa: E402
    FITTED_NOISE,
    NOISELESS,
    NoiseParams,
    apply_idle_noise,
    brute_force_evolve,
    idle_channel,
)
from .simulator import final_state, simulate  # noqa: E402
from .protocols import (  # noqa: E402
    analytic_cat_witness,
    clumsy_bound,
    dimension_estimate,
    disconnectivity,
    invasiveness_sweep,
    invasiveness_test,
    quantum_witness,
    run_blind,
    run_direct_measure,
    run_prepare_and_measure,
    sample_counts,
    verdict,
    w_max,
    witness_experiment,
)
