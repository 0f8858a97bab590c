"""Equilibrium structure and normal modes of a linear ion crystal.

N identical ions in a harmonic trap arrange themselves along the weak
(longitudinal) axis, balancing the trap's restoring force against mutual
Coulomb repulsion.  Working in the standard dimensionless units -- lengths in
the Coulomb length l0 = (e^2 / 4 pi eps0 m w_L^2)^(1/3), frequencies in units
of the longitudinal center-of-mass (CM) frequency -- the equilibrium
positions u_1 < ... < u_N satisfy

    u_m - sum_{p<m} 1/(u_m - u_p)^2 + sum_{p>m} 1/(u_m - u_p)^2 = 0.

Small oscillations about equilibrium separate into longitudinal modes
(eigenpairs of the stiffness matrix L) and transverse modes (eigenpairs of
T = alpha^2 I - A, where alpha is the transverse/longitudinal trap-frequency
ratio and A the Coulomb curvature).  The two matrices obey the identity
T = (alpha^2 + 1/2) I - L/2, so every transverse eigenvector equals a
longitudinal one with the eigenvalue mapped accordingly.

Frequencies are carried as dimensionless ratios (longitudinal modes relative
to the longitudinal CM frequency, transverse modes relative to the transverse
CM frequency) and converted to rad/s only where laser parameters enter.
"""

from dataclasses import dataclass, field
from typing import List, NamedTuple

import numpy as np

from .errors import ConfigError, EquilibriumError, UnstableCrystalError

# Force-balance residual required of a converged equilibrium (dimensionless).
_EQUILIBRIUM_TOL = 1e-12
_MAX_NEWTON_ITERATIONS = 200


class Mode(NamedTuple):
    """One normal mode: frequency ratio to its family's CM mode + pattern."""

    ratio: float
    vector: np.ndarray


@dataclass(frozen=True)
class TrapConfig:
    """Trap and crystal parameters.

    n_ions: number of ions in the linear crystal.
    omega_cm: transverse center-of-mass angular frequency (rad/s).
    anisotropy: ratio of longitudinal-CM to transverse-CM trap frequencies;
        must lie in (0, 1) so the transverse modes sit above the longitudinal
        ones and the linear chain can be stable.
    """

    n_ions: int
    omega_cm: float
    anisotropy: float

    def __post_init__(self):
        if not isinstance(self.n_ions, (int, np.integer)) or self.n_ions < 1:
            raise ConfigError(f"n_ions must be a positive integer, got {self.n_ions!r}")
        if not self.omega_cm > 0:
            raise ConfigError(f"omega_cm must be positive, got {self.omega_cm!r}")
        if not 0 < self.anisotropy < 1:
            raise ConfigError(
                f"anisotropy must lie in (0, 1), got {self.anisotropy!r}"
            )


def equilibrium_positions(n_ions: int) -> np.ndarray:
    """Solve the force balance for the dimensionless ion positions.

    Returns positions sorted ascending, antisymmetric about the trap center
    (u reversed equals -u), with force residual below 1e-12.  Uses a damped
    Newton iteration started from an evenly spaced guess; the Jacobian of the
    force balance is exactly the longitudinal stiffness matrix.
    """
    if n_ions < 1:
        raise ConfigError(f"n_ions must be >= 1, got {n_ions}")
    if n_ions == 1:
        return np.zeros(1)

    u = 0.9 * (np.arange(1, n_ions + 1) - (n_ions + 1) / 2.0)
    residual = np.inf
    for _ in range(_MAX_NEWTON_ITERATIONS):
        force = _force_residual(u)
        residual = np.max(np.abs(force))
        if residual < _EQUILIBRIUM_TOL:
            # Enforce exact antisymmetry; the solve preserves it only to
            # rounding and downstream reflection checks want it clean.
            u = 0.5 * (u - u[::-1])
            return u
        step = np.linalg.solve(longitudinal_stiffness(u), force)
        damping = 1.0
        while damping > 1e-4:
            trial = u - damping * step
            if np.all(np.diff(trial) > 0) and (
                np.max(np.abs(_force_residual(trial))) < residual
            ):
                break
            damping *= 0.5
        u = u - damping * step
    raise EquilibriumError(
        f"equilibrium solve for {n_ions} ions stalled at residual {residual:.3e}",
        residual=residual,
    )


def _force_residual(u: np.ndarray) -> np.ndarray:
    """Net dimensionless force on each ion at positions u."""
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    return u - (np.sign(diff) / diff**2).sum(axis=1)


def longitudinal_stiffness(u: np.ndarray) -> np.ndarray:
    """Dimensionless longitudinal stiffness matrix at positions u.

    Diagonal 1 + 2 sum_{p != m} 1/|u_m - u_p|^3, off-diagonal -2/|u_m - u_p|^3.
    Eigenvalues are squared mode frequencies in units of the longitudinal CM
    frequency; the lowest is exactly 1 (the CM mode).
    """
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    inv_cube = 1.0 / np.abs(diff) ** 3
    matrix = -2.0 * inv_cube
    np.fill_diagonal(matrix, 1.0 + 2.0 * inv_cube.sum(axis=1))
    return matrix


def transverse_stiffness(u: np.ndarray, anisotropy: float) -> np.ndarray:
    """Dimensionless transverse stiffness matrix at positions u.

    With alpha = 1/anisotropy (transverse trap frequency in longitudinal
    units): diagonal alpha^2 - sum_{p != m} 1/|u_m - u_p|^3, off-diagonal
    +1/|u_m - u_p|^3.  Eigenvalues are squared transverse frequencies in
    longitudinal-CM units; the largest is exactly alpha^2 (the CM mode).
    """
    alpha = 1.0 / anisotropy
    diff = u[:, None] - u[None, :]
    np.fill_diagonal(diff, np.inf)
    inv_cube = 1.0 / np.abs(diff) ** 3
    matrix = inv_cube.copy()
    np.fill_diagonal(matrix, alpha**2 - inv_cube.sum(axis=1))
    return matrix


def _fix_sign(vector: np.ndarray) -> np.ndarray:
    """Flip an eigenvector so its first non-negligible entry is positive."""
    for entry in vector:
        if abs(entry) > 1e-8:
            return vector if entry > 0 else -vector
    return vector


def longitudinal_modes(positions: np.ndarray) -> List[Mode]:
    """Longitudinal eigenmodes, sorted ascending in frequency (CM first).

    Ratios are mode frequencies over the longitudinal CM frequency, i.e.
    square roots of the stiffness eigenvalues.
    """
    matrix = longitudinal_stiffness(np.asarray(positions, dtype=float))
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    if eigenvalues[0] <= 0:
        raise UnstableCrystalError(
            f"longitudinal stiffness is not positive definite "
            f"(lowest eigenvalue {eigenvalues[0]:.3e})",
            mode_index=0,
        )
    return [
        Mode(float(np.sqrt(eigenvalues[k])), _fix_sign(eigenvectors[:, k]))
        for k in range(len(eigenvalues))
    ]


def transverse_modes(positions: np.ndarray, anisotropy: float) -> List[Mode]:
    """Transverse eigenmodes, sorted descending in frequency (CM first).

    Ratios are mode frequencies over the transverse CM frequency; the CM
    entry is exactly 1.  Raises UnstableCrystalError when any squared
    frequency is non-positive, i.e. the chain is past the zigzag transition
    at this anisotropy.
    """
    if not 0 < anisotropy < 1:
        raise ConfigError(f"anisotropy must lie in (0, 1), got {anisotropy!r}")
    matrix = transverse_stiffness(np.asarray(positions, dtype=float), anisotropy)
    eigenvalues, eigenvectors = np.linalg.eigh(matrix)
    order = np.argsort(eigenvalues)[::-1]
    eigenvalues = eigenvalues[order]
    eigenvectors = eigenvectors[:, order]
    if eigenvalues[-1] <= 0:
        bad = int(np.argmax(eigenvalues <= 0))
        raise UnstableCrystalError(
            f"transverse mode {bad + 1} of {len(eigenvalues)} has non-positive "
            f"squared frequency {eigenvalues[bad]:.3e} at anisotropy "
            f"{anisotropy}; the linear chain is past the zigzag transition",
            mode_index=bad,
        )
    # Ratios relative to the CM (largest) eigenvalue; the CM ratio is then
    # exactly 1.0 rather than 1 - O(machine epsilon).
    ratios = np.sqrt(eigenvalues / eigenvalues[0])
    return [
        Mode(float(ratios[k]), _fix_sign(eigenvectors[:, k]))
        for k in range(len(eigenvalues))
    ]


@dataclass(frozen=True)
class IonCrystal:
    """Equilibrium positions plus both normal-mode families for one trap."""

    config: TrapConfig
    positions: np.ndarray = field(repr=False)
    longitudinal: List[Mode] = field(repr=False)
    transverse: List[Mode] = field(repr=False)

    @classmethod
    def from_config(cls, config: TrapConfig) -> "IonCrystal":
        positions = equilibrium_positions(config.n_ions)
        return cls(
            config=config,
            positions=positions,
            longitudinal=longitudinal_modes(positions),
            transverse=transverse_modes(positions, config.anisotropy),
        )

    @property
    def n_ions(self) -> int:
        return self.config.n_ions

    def transverse_ratios(self) -> np.ndarray:
        """Transverse frequency ratios, descending (CM first, exactly 1)."""
        return np.array([mode.ratio for mode in self.transverse])

    def transverse_vectors(self) -> np.ndarray:
        """Transverse eigenvectors, one row per mode, ordered as the ratios."""
        return np.stack([mode.vector for mode in self.transverse])

    def transverse_frequency(self, mode_index: int) -> float:
        """Angular frequency (rad/s) of one transverse mode."""
        return self.transverse[mode_index].ratio * self.config.omega_cm

    def zigzag_index(self) -> int:
        """Index of the zigzag mode (lowest transverse frequency)."""
        return len(self.transverse) - 1
