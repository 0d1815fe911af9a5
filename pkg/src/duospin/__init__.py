"""Simulation and numerical analysis of a mean-field spin-flip model with a
quenched binary environment.

Each of N sites carries a fast spin sigma, a slow spin omega, and a frozen
environment sign eta.  Sigma flips at rate ``exp(-beta sigma omega)``; omega
flips at rate ``exp(-gamma omega (m_sigma + h eta))``, where ``m_sigma`` is
the empirical sigma-magnetization.  The package provides:

* :mod:`duospin.simulate` — exact event-driven simulation of the finite-N
  chain, O(1) per event through the 8-cell sufficient statistic;
* :mod:`duospin.limit` — the closed 7-moment ODE system of the
  infinite-population limit;
* :mod:`duospin.equilibria` — stationary states, the scalar self-consistency
  map, phase classification, continuous/fold boundaries, tricritical point,
  and the linearization spectrum in closed form;
* :mod:`duospin.fluctuations` — CLT ingredients (linear drift, diffusion
  matrix, initial covariance) and Lyapunov propagation of the fluctuation
  covariance, plus a finite-N covariance experiment;
* :mod:`duospin.critical` — critical-scaling experiments on the continuous
  boundary (N^{1/4}-clock null-direction drift; N^{1/2}-clock cubic
  diffusion) with independent SDE/quadrature oracles;
* :mod:`duospin.oracle` — small-system matrix-exponential and naive
  per-site references used for validation.

Command line: ``python -m duospin <simulate|ode|phase|clt|critical> ...``.
"""

from .model import (
    CELL_SPINS,
    MOMENT_NAMES,
    MOMENT_PATTERNS,
    CellCounts,
    ModelParams,
    MomentVector,
    SpinConfig,
    cell_index,
    cells_from_config,
    flip_rate_omega,
    flip_rate_sigma,
    moments_from_cells,
    moments_to_cell_probs,
)
from .simulate import (
    ETA_MODES,
    LAW4_STATES,
    Event,
    ReplicaFailure,
    SimState,
    SimulationCapError,
    TrajectoryRecord,
    init_state,
    read_trajectory_csv,
    run_replicas,
    simulate,
    step,
    total_rate,
    write_trajectory_csv,
)
from .limit import (
    OdeIntegrationError,
    OdePath,
    flow_comparison,
    integrate,
    mkv_rhs,
)
from .equilibria import (
    Equilibrium,
    FoldPoint,
    NeutralJacobian,
    PhaseDiagram,
    PhasePoint,
    critical_curve_h,
    equilibrium_moments,
    fold_boundary,
    gamma_map,
    gamma_map_derivative,
    jacobian_at_neutral,
    phase_diagram_scan,
    solve_fixed_points,
    tricritical_point,
    write_curves_json,
    write_phase_csv,
)
from .fluctuations import (
    FLUCTUATION_COMPONENTS,
    CltPropagation,
    CltReport,
    FluctuationModel,
    FluctuationPath,
    clt_experiment,
    diffusion_sq,
    drift_a1,
    drift_a2,
    empirical_fluctuations,
    init_covariance,
    propagate_clt,
    write_covariance_csv,
)
from .critical import (
    CriticalCoordinates,
    CubicSdeParams,
    HomogeneousCriticalResult,
    InhomogeneousCriticalResult,
    SdeOracleResult,
    critical_coords,
    critical_coords_path,
    critical_params,
    critical_transform,
    criticality_residual,
    cubic_stationary_moments,
    null_direction_residual,
    run_homogeneous_critical,
    run_inhomogeneous_critical,
    sde_oracle,
    write_homogeneous_csv,
    write_inhomogeneous_csv,
    write_summary_json,
)
from .oracle import (
    TWO_SITE_STATES,
    reference_simulate,
    total_variation,
    two_site_generator,
    two_site_initial_distribution,
    two_site_state_index,
    two_site_transient,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    # model
    "CELL_SPINS",
    "MOMENT_NAMES",
    "MOMENT_PATTERNS",
    "CellCounts",
    "ModelParams",
    "MomentVector",
    "SpinConfig",
    "cell_index",
    "cells_from_config",
    "flip_rate_omega",
    "flip_rate_sigma",
    "moments_from_cells",
    "moments_to_cell_probs",
    # simulate
    "ETA_MODES",
    "LAW4_STATES",
    "Event",
    "ReplicaFailure",
    "SimState",
    "SimulationCapError",
    "TrajectoryRecord",
    "init_state",
    "read_trajectory_csv",
    "run_replicas",
    "simulate",
    "step",
    "total_rate",
    "write_trajectory_csv",
    # limit
    "OdeIntegrationError",
    "OdePath",
    "flow_comparison",
    "integrate",
    "mkv_rhs",
    # equilibria
    "Equilibrium",
    "FoldPoint",
    "NeutralJacobian",
    "PhaseDiagram",
    "PhasePoint",
    "critical_curve_h",
    "equilibrium_moments",
    "fold_boundary",
    "gamma_map",
    "gamma_map_derivative",
    "jacobian_at_neutral",
    "phase_diagram_scan",
    "solve_fixed_points",
    "tricritical_point",
    "write_curves_json",
    "write_phase_csv",
    # fluctuations
    "FLUCTUATION_COMPONENTS",
    "CltPropagation",
    "CltReport",
    "FluctuationModel",
    "FluctuationPath",
    "clt_experiment",
    "diffusion_sq",
    "drift_a1",
    "drift_a2",
    "empirical_fluctuations",
    "init_covariance",
    "propagate_clt",
    "write_covariance_csv",
    # critical
    "CriticalCoordinates",
    "CubicSdeParams",
    "HomogeneousCriticalResult",
    "InhomogeneousCriticalResult",
    "SdeOracleResult",
    "critical_coords",
    "critical_coords_path",
    "critical_params",
    "critical_transform",
    "criticality_residual",
    "cubic_stationary_moments",
    "null_direction_residual",
    "run_homogeneous_critical",
    "run_inhomogeneous_critical",
    "sde_oracle",
    "write_homogeneous_csv",
    "write_inhomogeneous_csv",
    "write_summary_json",
    # oracle
    "TWO_SITE_STATES",
    "reference_simulate",
    "total_variation",
    "two_site_generator",
    "two_site_initial_distribution",
    "two_site_state_index",
    "two_site_transient",
]
