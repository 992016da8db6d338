"""Distributed variational quantum linear solver on an embedded state-vector simulator."""
from .cost import (CostFunction, ProblemInstance, cost_for_state, evaluate_cost, fidelity,
                   solution_state)
from .executor import ExecutionPlan, Executor, strided_assign
from .estimator import circuits_per_iteration, estimate
from .optimizer import OptimizerConfig, minimize
from .pauli import LCUDecomposition, PauliString, decompose, prune, reconstruct
from .problems import (HeleShawSpec, LinearSystem, TridiagSpec, classical_solve,
                       heleshaw_pressure_system, heleshaw_velocity_system, tridiag_toeplitz)

__version__ = "0.1.0"
