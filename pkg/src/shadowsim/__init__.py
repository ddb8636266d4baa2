"""Shadow simulation of quantum channels under no-signaling codes, solved as semidefinite programs."""
from .channels import (ChoiOperator, QuasiDecomposition, SuperchannelChoi, VirtualChannel, amplitude_damping_choi,
                       apply, branch_decomposition, compose_superchannel, decompose_hpts, dephasing_choi,
                       depolarizing_choi, identity_choi, is_cptp, is_hpts, is_no_signaling, kraus_to_choi,
                       random_cptp, tensor_channels, tensor_power)
from .programs import (TaskRequest, TaskResult, comm_min_cost, comm_min_error, comm_zero_error_cost,
                       diamond_distance, formation_min_cost, formation_min_error, formation_zero_error_cost,
                       min_cost_ns, min_error_ns, min_error_quantum, shadow_capacity, shadow_capacity_gamma_one,
                       shadow_sim_cost)
from .sampling import SamplingPlan, SampleEstimate, hoeffding_rounds, run, true_expectation
from .sdp import SdpError, SdpProgram, SdpSolution, check_feasible, solve

__version__ = "0.1.0"

__all__ = [
    "ChoiOperator",
    "QuasiDecomposition",
    "SampleEstimate",
    "SamplingPlan",
    "SdpError",
    "SdpProgram",
    "SdpSolution",
    "SuperchannelChoi",
    "TaskRequest",
    "TaskResult",
    "VirtualChannel",
    "amplitude_damping_choi",
    "apply",
    "branch_decomposition",
    "check_feasible",
    "comm_min_cost",
    "comm_min_error",
    "comm_zero_error_cost",
    "compose_superchannel",
    "decompose_hpts",
    "dephasing_choi",
    "depolarizing_choi",
    "diamond_distance",
    "formation_min_cost",
    "formation_min_error",
    "formation_zero_error_cost",
    "hoeffding_rounds",
    "identity_choi",
    "is_cptp",
    "is_hpts",
    "is_no_signaling",
    "kraus_to_choi",
    "min_cost_ns",
    "min_error_ns",
    "min_error_quantum",
    "random_cptp",
    "run",
    "shadow_capacity",
    "shadow_capacity_gamma_one",
    "shadow_sim_cost",
    "solve",
    "tensor_channels",
    "tensor_power",
    "true_expectation",
]
