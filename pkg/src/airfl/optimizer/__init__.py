from airfl.optimizer.ao import AoConfig, AoResult, alternating_optimize, initialize
from airfl.optimizer.qcqp import QcqpInstance, QcqpSolution, kkt_residual, solve_qcqp_kkt
from airfl.optimizer.ris import (
    build_phi_subproblem,
    build_phitilde_subproblem,
    coupled_ris_power,
    passive_phase_update,
    penalized_objective,
    penalty_phi_loop,
    true_ris_power,
)
from airfl.optimizer.transceiver import optimal_receive_beamformer, solve_transmit_coeffs

__all__ = [
    "AoConfig",
    "AoResult",
    "QcqpInstance",
    "QcqpSolution",
    "alternating_optimize",
    "build_phi_subproblem",
    "build_phitilde_subproblem",
    "coupled_ris_power",
    "initialize",
    "kkt_residual",
    "optimal_receive_beamformer",
    "passive_phase_update",
    "penalized_objective",
    "penalty_phi_loop",
    "solve_qcqp_kkt",
    "solve_transmit_coeffs",
    "true_ris_power",
]
