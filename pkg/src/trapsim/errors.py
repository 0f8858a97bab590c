"""Exception hierarchy and process exit codes.

Failures fall into two families that the command-line tools map onto exit
codes: configuration problems (malformed files, unknown keys, requests the
model cannot satisfy) exit with code 1, while physics and numerics problems
(unstable crystal, resonant drive, integration failure) exit with code 2.
"""

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_PHYSICS = 2


class TrapsimError(Exception):
    """Base class for all package errors; carries the CLI exit code."""

    exit_code = EXIT_PHYSICS


class ConfigError(TrapsimError):
    """Invalid configuration input or an impossible request."""

    exit_code = EXIT_CONFIG


class BranchDegeneracyError(ConfigError):
    """The selected control branch cannot be resolved from another branch.

    Raised during gate design when the energy splitting of the selected
    control pattern lies within 2*B_y of another pattern's splitting, so the
    longitudinal field cannot address one without driving the other.
    """

    def __init__(self, message: str, clashing_pattern: str = ""):
        super().__init__(message)
        self.clashing_pattern = clashing_pattern


class PhysicsError(TrapsimError):
    """Physical or numerical failure during model evaluation."""

    exit_code = EXIT_PHYSICS


class EquilibriumError(PhysicsError):
    """The crystal equilibrium root solve did not converge."""

    def __init__(self, message: str, residual: float = float("nan")):
        super().__init__(message)
        self.residual = residual


class UnstableCrystalError(PhysicsError):
    """A transverse mode has non-positive stiffness (zigzag transition)."""

    def __init__(self, message: str, mode_index: int = -1):
        super().__init__(message)
        self.mode_index = mode_index


class ResonantDetuningError(PhysicsError):
    """The beatnote frequency lies too close to a phonon mode."""


class IntegrationError(PhysicsError):
    """Adaptive integration failed (step underflow or norm-drift budget)."""
