"""Simulation and verification lab for recovering geometric planted matchings."""

from .model import (
    CostMatrices,
    ErrorReport,
    Instance,
    PermutationMap,
    cost_matrices,
    derive_seed,
    error_report,
    generate_instance,
    instance_from_json,
    instance_to_json,
    load_instance,
    save_instance,
)
from .lap import AssignmentSolution, brute_force_mle, mle, solve_assignment

__version__ = "0.1.0"
