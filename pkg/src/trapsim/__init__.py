"""Trapped-ion crystal modes, exchange couplings, and gate simulation.

The package is layered bottom-up:

    crystal    equilibrium positions and normal modes of the linear chain
    exchange   phonon-mediated Ising couplings J_ij(t) and derived scalars
    dynamics   Schrodinger integration of the spin state in the X basis
    gates      field-schedule design and the analytic two-level oracle
    scenarios  config-driven runs, sweeps, and table regeneration
    backend    compiled vs pure-NumPy propagation kernel selection

See the command-line entry point ``trapsim`` for the scenario workflow.
"""

from .backend import kernel_name
from .crystal import IonCrystal, Mode, TrapConfig
from .dynamics import (
    FieldSchedule,
    SpinState,
    Trajectory,
    apply_hamiltonian,
    evolve,
    target_probabilities,
)
from .errors import (
    BranchDegeneracyError,
    ConfigError,
    EquilibriumError,
    IntegrationError,
    PhysicsError,
    ResonantDetuningError,
    TrapsimError,
    UnstableCrystalError,
)
from .exchange import (
    ExchangeModel,
    LaserParams,
    delta_for_control,
    exchange_at,
    j_rms,
    j_rms_doubled,
    lamb_dicke_per_mode,
    static_exchange,
)
from .gates import (
    GateReport,
    GateSpec,
    SubspaceEvolution,
    analytic_subspace_evolution,
    design_gate,
    gate_report,
    predicted_error_bound,
)
from .scenarios import ScenarioConfig, parse_config, run_scenario, sweep_scenario

__version__ = "0.1.0"

__all__ = [
    "BranchDegeneracyError",
    "ConfigError",
    "EquilibriumError",
    "ExchangeModel",
    "FieldSchedule",
    "GateReport",
    "GateSpec",
    "IntegrationError",
    "IonCrystal",
    "LaserParams",
    "Mode",
    "PhysicsError",
    "ResonantDetuningError",
    "ScenarioConfig",
    "SpinState",
    "SubspaceEvolution",
    "Trajectory",
    "TrapConfig",
    "TrapsimError",
    "UnstableCrystalError",
    "analytic_subspace_evolution",
    "apply_hamiltonian",
    "delta_for_control",
    "design_gate",
    "evolve",
    "exchange_at",
    "gate_report",
    "j_rms",
    "j_rms_doubled",
    "kernel_name",
    "lamb_dicke_per_mode",
    "parse_config",
    "predicted_error_bound",
    "run_scenario",
    "static_exchange",
    "sweep_scenario",
    "target_probabilities",
]
