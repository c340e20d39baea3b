"""Andersen dynamics, its couplings and contraction-rate experiments"""
from .coupling import (
    coupled_substitution,
    coupled_velocity,
    rejection_probability_exact,
    simulate_coupling,
    simulate_coupling_replicas,
)
from .dynamics import sample_jump_skeleton, simulate_andersen, simulate_andersen_replicas, velocity_substitution
from .errors import AndersenError, ConfigurationError, FitDomainError, InvalidStateError, SimulationError
from .flow import coupled_flow_torus, flow
from .geometry import minimal_difference, translate, wrap_position
from .harness import estimate_rho_curve, fit_decay_rate, supermartingale_check, sweep
from .metrics import WahMetric, rho_squared_wah, torus_distance, torus_params, wah_rate
from .potentials import potential_constants, potential_energy, potential_gradient
from .schemas import AndersenConfig, CouplingConfig, FlowConfig, RunConfig, SpaceSpec
from .states import EuclideanCoupledState, PhasePoint, TorusCoupledState

__all__ = [
    "AndersenConfig",
    "AndersenError",
    "ConfigurationError",
    "CouplingConfig",
    "EuclideanCoupledState",
    "FitDomainError",
    "FlowConfig",
    "InvalidStateError",
    "PhasePoint",
    "RunConfig",
    "SimulationError",
    "SpaceSpec",
    "TorusCoupledState",
    "WahMetric",
    "coupled_flow_torus",
    "coupled_substitution",
    "coupled_velocity",
    "estimate_rho_curve",
    "fit_decay_rate",
    "flow",
    "minimal_difference",
    "potential_constants",
    "potential_energy",
    "potential_gradient",
    "rejection_probability_exact",
    "rho_squared_wah",
    "sample_jump_skeleton",
    "simulate_andersen",
    "simulate_andersen_replicas",
    "simulate_coupling",
    "simulate_coupling_replicas",
    "supermartingale_check",
    "sweep",
    "torus_distance",
    "torus_params",
    "translate",
    "velocity_substitution",
    "wah_rate",
    "wrap_position",
]
