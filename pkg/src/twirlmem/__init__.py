"""Model-free readout-error mitigation with balanced Pauli twirling and
measurement-transforming CX circuits."""
from .circuit import Circuit, CircuitError, CxGate
from .mitigate import (
    INFINITE,
    BoundInputs,
    EstimatorConfig,
    MitigationError,
    TwirledReadout,
    bound_theorem1,
    bound_theorem3,
    mitigated_estimate,
    noisy_expectation_v,
    tpn_baseline,
)
from .mtcompile import MtPlan, compile_mt, plan_for
from .noise import (
    ReducedPTM,
    SingleQubitReadout,
    TransferMatrix,
    build_ctmp_lambda,
    build_tpn_lambda,
    device_noise,
    lambda_to_ptm,
)
from .pauli import PauliString, ZMask
from .sim import GateNoiseParams, PureState, basis_state, haar_state, zero_state
from .twirl import TwirlSet, full_pauli_group, random_twirl_set, sbpt_set

__version__ = "0.1.0"
