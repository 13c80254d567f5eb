"""Fast-ABS: fast antenna-module and beam switching for mmWave handsets.

Simulation library for estimating multipath (gain, AoA, ToA) tuples from a
few beam-specific CSI measurements on one antenna module, reconstructing
virtual CSI for the other modules via fixed handset geometry, and selecting
the best module/beam pair without rescanning.
"""

from fastabs.array_model import (
    ArraySpec,
    Codebook,
    SubcarrierGrid,
    beam_gain,
    beam_gain_derivative,
    delay_vector,
    make_dft_codebook,
    orthogonal_beam_centers,
    rx_beam_vector,
)
from fastabs.channel import (
    CsiMatrix,
    NoiseSpec,
    PathTuple,
    TransmitBeamChannel,
    apply_hand_blockage,
    make_two_path_scenario,
    measure,
    synthesize_csi,
)
from fastabs.geometry import ModuleLayout, PowerReport, delay_offset, map_tuples, power_ratio
from fastabs.estimator import (
    EstimateResult,
    EstimatorConfig,
    cost_j,
    default_grids,
    nomp_estimate,
    omp_estimate,
)
from fastabs.crlb import (
    ParamVector,
    SingularFisherError,
    assemble_fim,
    closed_form_sigmas,
    crlb_diagonal,
    csi_lower_bound,
    theta_crlb_simplified,
    virtual_bound_equality,
)
from fastabs.switching import (
    SwitchDecision,
    SwitchState,
    SwitchingPolicy,
    beam_scores,
    es_oracle,
    reconstruct_virtual_csi,
    rsnr,
    select_best,
    step_state_machine,
)
from fastabs.harness import (
    ExperimentConfig,
    ResultTable,
    compute_cdf,
    default_array,
    deployable_codebook,
    preset_codebook,
    run_experiment,
)

__all__ = [
    "ArraySpec",
    "Codebook",
    "SubcarrierGrid",
    "beam_gain",
    "beam_gain_derivative",
    "delay_vector",
    "make_dft_codebook",
    "orthogonal_beam_centers",
    "rx_beam_vector",
    "CsiMatrix",
    "NoiseSpec",
    "PathTuple",
    "TransmitBeamChannel",
    "apply_hand_blockage",
    "make_two_path_scenario",
    "measure",
    "synthesize_csi",
    "ModuleLayout",
    "PowerReport",
    "delay_offset",
    "map_tuples",
    "power_ratio",
    "EstimateResult",
    "EstimatorConfig",
    "cost_j",
    "default_grids",
    "nomp_estimate",
    "omp_estimate",
    "ParamVector",
    "SingularFisherError",
    "assemble_fim",
    "closed_form_sigmas",
    "crlb_diagonal",
    "csi_lower_bound",
    "theta_crlb_simplified",
    "virtual_bound_equality",
    "SwitchDecision",
    "SwitchState",
    "SwitchingPolicy",
    "beam_scores",
    "es_oracle",
    "reconstruct_virtual_csi",
    "rsnr",
    "select_best",
    "step_state_machine",
    "ExperimentConfig",
    "ResultTable",
    "compute_cdf",
    "default_array",
    "deployable_codebook",
    "preset_codebook",
    "run_experiment",
]
