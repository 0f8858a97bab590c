"""Phonon-mediated spin-exchange couplings for a laser-driven ion crystal.

A bichromatic drive at beatnote frequency mu, detuned from the transverse
normal modes, mediates an effective Ising interaction between the ion spins.
In the interaction picture the pair coupling is

    J_ij(t) = sum_nu C_nu,ij * [w_nu - w_nu cos(2 mu t)
                                - 2 mu sin(w_nu t) sin(mu t)],

    C_nu,ij = (1/2) Omega_i Omega_j eta_nu^2 b_i^nu b_j^nu / (mu^2 - w_nu^2),

with w_nu the transverse mode angular frequencies, b^nu the orthonormal mode
vectors and eta_nu the per-mode Lamb-Dicke parameters.  The bracket vanishes
identically at t = 0 and time-averages to w_nu, so the static (time-averaged)
coupling is J0_ij = sum_nu C_nu,ij w_nu.

All couplings are angular frequencies (energy over hbar, rad/s).  Diagonal
entries are set to zero: a spin's coupling to itself only shifts the global
phase.

The mode sum can be restricted to a chosen subset.  Detuning close to one
mode does not actually suppress the neighbours' contributions when the mode
spacing is comparable to the detuning, so the restricted single-mode model
and the full sum give materially different couplings; both are available and
the scenario layer picks the single referenced mode by default, which is the
model the bundled reference tables are built on.
"""

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple, Union

import numpy as np

from .crystal import IonCrystal
from .errors import ConfigError, ResonantDetuningError

# Relative closeness of mu^2 to any mode's w^2 that we refuse to evaluate:
# the coupling diverges on resonance and such inputs indicate misconfiguration.
_RESONANCE_GUARD = 1e-6

# Lamb-Dicke parameters above this value leave the regime where the
# spin-phonon expansion behind J_ij is trustworthy.
_LAMB_DICKE_WARN = 0.3


@dataclass(frozen=True)
class LaserParams:
    """Drive parameters shared by all ions.

    rabi: per-ion angular Rabi frequency Omega (rad/s); uniform across ions.
    eta_cm: dimensionless Lamb-Dicke parameter at the transverse CM mode.
    mu: angular beatnote (detuning) frequency of the bichromatic drive (rad/s).
    mode_family: label of the mode family the detuning references
        ("cm" or "zigzag"); informational.
    """

    rabi: float
    eta_cm: float
    mu: float
    mode_family: str = "cm"

    def __post_init__(self):
        if self.rabi < 0:
            raise ConfigError(f"rabi must be non-negative, got {self.rabi!r}")
        if not self.eta_cm > 0:
            raise ConfigError(f"eta_cm must be positive, got {self.eta_cm!r}")
        if self.eta_cm > _LAMB_DICKE_WARN:
            warnings.warn(
                f"eta_cm = {self.eta_cm} is outside the Lamb-Dicke regime "
                f"(> {_LAMB_DICKE_WARN}); exchange couplings may be unreliable",
                stacklevel=2,
            )
        if not self.mu > 0:
            raise ConfigError(f"mu must be positive, got {self.mu!r}")


ModeSelection = Union[str, Sequence[int], None]


def lamb_dicke_per_mode(eta_cm: float, ratios: np.ndarray) -> np.ndarray:
    """Per-mode Lamb-Dicke parameters from the CM value.

    At fixed drive wave vector, eta scales as 1/sqrt(mode frequency), so
    eta_nu = eta_cm / sqrt(ratio_nu) with ratio_nu relative to the CM mode.
    """
    ratios = np.asarray(ratios, dtype=float)
    if np.any(ratios <= 0):
        raise ConfigError("mode frequency ratios must be positive")
    return eta_cm / np.sqrt(ratios)


def _selected_mode_indices(crystal: IonCrystal, modes: ModeSelection) -> np.ndarray:
    """Resolve a mode selection to transverse-mode indices."""
    n_modes = crystal.n_ions
    if modes is None or modes == "all":
        return np.arange(n_modes)
    if modes == "cm":
        return np.array([0])
    if modes == "zigzag":
        return np.array([crystal.zigzag_index()])
    indices = np.array(sorted(set(int(m) for m in modes)))
    if len(indices) == 0:
        raise ConfigError("mode selection must include at least one mode")
    if indices[0] < 0 or indices[-1] >= n_modes:
        raise ConfigError(
            f"mode indices {indices.tolist()} out of range for {n_modes} modes"
        )
    return indices


def _check_resonance(crystal: IonCrystal, laser: LaserParams) -> None:
    """Refuse beatnotes within the resonance guard of any transverse mode."""
    mu_sq = laser.mu**2
    for index, mode in enumerate(crystal.transverse):
        omega = mode.ratio * crystal.config.omega_cm
        if abs(mu_sq - omega**2) < _RESONANCE_GUARD * mu_sq:
            raise ResonantDetuningError(
                f"beatnote mu = {laser.mu:.6e} rad/s lies within the resonance "
                f"guard of transverse mode {index + 1} "
                f"(omega = {omega:.6e} rad/s); exchange couplings diverge there"
            )


def mode_coefficients(
    crystal: IonCrystal, laser: LaserParams, modes: ModeSelection = None
) -> Tuple[np.ndarray, np.ndarray]:
    """Angular frequencies and coupling tensors of the selected modes.

    Returns (omegas, coeffs): omegas[m] is the angular frequency (rad/s) of
    selected mode m and coeffs[m] the symmetric zero-diagonal matrix C_m,ij
    defined in the module docstring, so that J(t) = sum_m coeffs[m] *
    bracket_m(t) and J0 = sum_m coeffs[m] * omegas[m].
    """
    _check_resonance(crystal, laser)
    indices = _selected_mode_indices(crystal, modes)
    ratios = crystal.transverse_ratios()
    vectors = crystal.transverse_vectors()
    etas = lamb_dicke_per_mode(laser.eta_cm, ratios)

    omegas = ratios[indices] * crystal.config.omega_cm
    n = crystal.n_ions
    coeffs = np.empty((len(indices), n, n))
    for out_row, mode_index in enumerate(indices):
        b = vectors[mode_index]
        omega = omegas[out_row]
        scale = 0.5 * laser.rabi**2 * etas[mode_index] ** 2 / (laser.mu**2 - omega**2)
        matrix = scale * np.outer(b, b)
        np.fill_diagonal(matrix, 0.0)
        coeffs[out_row] = matrix
    return omegas, coeffs


def static_exchange(
    crystal: IonCrystal, laser: LaserParams, modes: ModeSelection = None
) -> np.ndarray:
    """Time-averaged coupling matrix J0 (rad/s); symmetric, zero diagonal."""
    omegas, coeffs = mode_coefficients(crystal, laser, modes)
    return np.tensordot(omegas, coeffs, axes=1)


def bracket(omegas: np.ndarray, mu: float, t: float) -> np.ndarray:
    """Per-mode time factor of J(t); vanishes at t = 0, averages to omega."""
    return (
        omegas
        - omegas * np.cos(2.0 * mu * t)
        - 2.0 * mu * np.sin(omegas * t) * np.sin(mu * t)
    )


def exchange_at(
    crystal: IonCrystal, laser: LaserParams, t: float, modes: ModeSelection = None
) -> np.ndarray:
    """Instantaneous coupling matrix J(t) (rad/s); symmetric, zero diagonal."""
    if t < 0:
        raise ConfigError(f"time must be non-negative, got {t!r}")
    omegas, coeffs = mode_coefficients(crystal, laser, modes)
    return np.tensordot(bracket(omegas, laser.mu, t), coeffs, axes=1)


@dataclass(frozen=True)
class ExchangeModel:
    """Precomputed exchange data for one crystal + drive configuration.

    j0: static coupling matrix (rad/s).
    mode_omegas: angular frequencies of the included modes (rad/s).
    mode_coeffs: per-mode coupling tensors C_m,ij (rad/s per bracket unit).
    mu: drive beatnote (rad/s).
    j_rms: root-mean-square pair coupling of j0 (rad/s).
    """

    j0: np.ndarray
    mode_omegas: np.ndarray
    mode_coeffs: np.ndarray
    mu: float
    j_rms: float

    @classmethod
    def build(
        cls, crystal: IonCrystal, laser: LaserParams, modes: ModeSelection = None
    ) -> "ExchangeModel":
        omegas, coeffs = mode_coefficients(crystal, laser, modes)
        j0 = np.tensordot(omegas, coeffs, axes=1)
        rms = j_rms(j0) if crystal.n_ions >= 2 else 0.0
        return cls(j0=j0, mode_omegas=omegas, mode_coeffs=coeffs, mu=laser.mu, j_rms=rms)

    @property
    def n_ions(self) -> int:
        return self.j0.shape[0]

    def j_at(self, t: float) -> np.ndarray:
        """Instantaneous J(t) from the precomputed mode data."""
        return self.j0 + np.tensordot(
            bracket(self.mode_omegas, self.mu, t) - self.mode_omegas,
            self.mode_coeffs,
            axes=1,
        )


def j_rms(j0: np.ndarray) -> float:
    """Root-mean-square coupling over ordered ion pairs (rad/s).

    sqrt(sum_{i != j} J0_ij^2 / (N(N-1))); equals the common coupling when
    all pairs are equal.  See j_rms_doubled for the variant that doubles each
    coupling before averaging.
    """
    j0 = np.asarray(j0, dtype=float)
    n = j0.shape[0]
    if n < 2:
        raise ConfigError("j_rms requires at least two ions")
    off = j0[~np.eye(n, dtype=bool)]
    return float(np.sqrt(np.mean(off**2)))


def j_rms_doubled(j0: np.ndarray) -> float:
    """RMS of the doubled couplings 2*J0_ij over unordered pairs (rad/s).

    sqrt(sum_{i > j} |2 J0_ij|^2 / (N(N-1))); exceeds j_rms by sqrt(2) for
    uniform couplings.  Exposed so both normalization conventions can be
    compared directly.
    """
    j0 = np.asarray(j0, dtype=float)
    n = j0.shape[0]
    if n < 2:
        raise ConfigError("j_rms_doubled requires at least two ions")
    i_upper, j_upper = np.triu_indices(n, k=1)
    pairs = 2.0 * j0[i_upper, j_upper]
    return float(np.sqrt(np.sum(pairs**2) / (n * (n - 1))))


def delta_for_control(
    j0: np.ndarray, target_index: int, control_signs: Sequence[int]
) -> float:
    """Splitting between the target spin states at fixed control signs.

    Delta = 4 * sum_{i != target} J0_{target,i} * sigma_i (rad/s), the energy
    difference E(target +) - E(target -) produced by the Ising couplings for
    the given control configuration.  control_signs lists the +1/-1 values of
    the non-target ions in site order; target_index is 0-based.
    """
    j0 = np.asarray(j0, dtype=float)
    n = j0.shape[0]
    if not 0 <= target_index < n:
        raise ConfigError(
            f"target_index {target_index} out of range for {n} ions"
        )
    signs = [int(s) for s in control_signs]
    if len(signs) != n - 1:
        raise ConfigError(
            f"expected {n - 1} control signs for {n} ions, got {len(signs)}"
        )
    if any(s not in (-1, 1) for s in signs):
        raise ConfigError(f"control signs must be +1 or -1, got {signs}")
    others = [i for i in range(n) if i != target_index]
    return float(4.0 * sum(j0[target_index, i] * s for i, s in zip(others, signs)))
