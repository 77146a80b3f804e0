"""Relaxed rate-independent plasticity with softening, for homogeneous 2D states."""
from .evolution import (
    EvolutionState,
    MeasureSummary,
    MonotoneAffine,
    PiecewiseLinear,
    SolverError,
    TimeGrid,
    energy_balance_residual,
    incremental_step,
    prox_solve,
    radial_return,
    run_evolution,
    stability_check,
)
from .geometry import (
    Ball,
    Ellipsoid,
    MaterialModel,
    NonConformingYieldSet,
    Polytope,
    SqrtPotential,
    TabulatedPotential,
    H_eff,
    a_K,
    decompose_increment,
    envelope_oracle,
    keff_contains,
    theta_hat,
)
from .laminates import build_laminate, discrete_functional, iterated_envelope
from .scenario import Scenario, ScenarioError, load_scenario, run_scenario
from .tensors import DevTensor2, Elasticity, SymTensor2

__version__ = "0.1.0"
