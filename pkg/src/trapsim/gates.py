"""Field-schedule design and analytic subspace dynamics for controlled flips.

At fixed control spins, the target ion sees a two-level problem: the Ising
couplings split the target states by Delta = 4 sum_i J0_{target,i} sigma_i,
the longitudinal field moves every branch by -bx, and the transverse drive
couples the two target states.  Setting bx equal to the selected branch's
Delta makes that branch resonant, so|+> -> i|-> after by * t = pi/2 while
all other branches are detuned by at least the branch-splitting gap: an
i-Toffoli (uniform couplings select the all-minus branch; non-uniform ones,
e.g. from a zigzag-referenced drive, give every branch its own Delta and
thereby a programmable select gate).

The closed-form two-level evolution implemented here doubles as an oracle
for the full integrator when the drive addresses the target only (static
couplings): in that case the Hamiltonian is exactly block-diagonal over
control patterns.
"""

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

from .dynamics import FieldSchedule
from .errors import BranchDegeneracyError, ConfigError
from .exchange import ExchangeModel, delta_for_control


def _pattern_string(signs: Sequence[int]) -> str:
    return "".join("+" if s > 0 else "-" for s in signs)


@dataclass(frozen=True)
class GateSpec:
    """What gate to realize.

    kind: "toffoli" (flip on one fixed pattern of uniform couplings) or
        "select" (programmable branch choice); informational label.
    target_index: 0-based site of the target ion.
    selected_controls: +1/-1 per non-target ion, in site order; the branch
        whose target flips.
    by: transverse drive amplitude (rad/s).
    mode_reference: which transverse mode the drive references ("cm" or
        "zigzag"); informational echo of the exchange model.
    detuning_ratio: beatnote over the referenced mode frequency.
    pulse_multiple: odd multiple of the basic pi/2 transverse-field area;
        1 is the fast gate, larger values reproduce long-pulse studies.
    """

    kind: str
    target_index: int
    selected_controls: Tuple[int, ...]
    by: float
    mode_reference: str = "cm"
    detuning_ratio: float = 0.0
    pulse_multiple: int = 1

    def __post_init__(self):
        if self.kind not in ("toffoli", "select"):
            raise ConfigError(f"kind must be 'toffoli' or 'select', got {self.kind!r}")
        if not self.by > 0:
            raise ConfigError(f"by must be positive, got {self.by!r}")
        if any(s not in (-1, 1) for s in self.selected_controls):
            raise ConfigError("selected_controls must be +1/-1 values")
        if self.detuning_ratio == 1.0:
            raise ConfigError("detuning_ratio of exactly 1 drives the mode on resonance")
        if self.pulse_multiple < 1 or self.pulse_multiple % 2 == 0:
            raise ConfigError(
                f"pulse_multiple must be a positive odd integer, "
                f"got {self.pulse_multiple}"
            )


def control_patterns(n_controls: int) -> list:
    """All control-sign tuples, ordered with all-plus first (binary order)."""
    patterns = []
    for index in range(2**n_controls):
        bits = [(index >> (n_controls - 1 - k)) & 1 for k in range(n_controls)]
        patterns.append(tuple(1 - 2 * b for b in bits))
    return patterns


def branch_splittings(
    model: ExchangeModel, target_index: int
) -> Dict[Tuple[int, ...], float]:
    """Delta (rad/s) for every control pattern of this target."""
    n_controls = model.n_ions - 1
    return {
        pattern: delta_for_control(model.j0, target_index, pattern)
        for pattern in control_patterns(n_controls)
    }


def design_gate(
    spec: GateSpec, model: ExchangeModel, enforce_separation: bool = True
) -> FieldSchedule:
    """Choose bx and the pulse duration for the requested gate.

    bx equals the selected branch's splitting, putting it on resonance; the
    duration satisfies by * t = pulse_multiple * pi/2.  The drive scope is
    "all" ions (callers may rebuild the schedule with scope="target" for the
    block-diagonal model).  Raises BranchDegeneracyError when another
    pattern's splitting lies within 2*by of the selected one, since the
    off-resonant suppression by/(Delta - bx) then fails to distinguish them;
    pass enforce_separation=False to study that mixing regime deliberately.
    """
    n_controls = model.n_ions - 1
    if len(spec.selected_controls) != n_controls:
        raise ConfigError(
            f"selected_controls has {len(spec.selected_controls)} entries "
            f"but the crystal has {n_controls} control ions"
        )
    splittings = branch_splittings(model, spec.target_index)
    bx = splittings[tuple(spec.selected_controls)]
    if enforce_separation:
        for pattern, delta in splittings.items():
            if pattern == tuple(spec.selected_controls):
                continue
            if abs(delta - bx) < 2.0 * spec.by:
                raise BranchDegeneracyError(
                    f"control pattern {_pattern_string(pattern)} has splitting "
                    f"within 2*by of the selected "
                    f"{_pattern_string(spec.selected_controls)} "
                    f"({abs(delta - bx):.3e} < {2.0 * spec.by:.3e} rad/s); "
                    f"the field cannot address one without driving the other",
                    clashing_pattern=_pattern_string(pattern),
                )

    duration = spec.pulse_multiple * (math.pi / 2.0) / spec.by
    return FieldSchedule(
        bx=bx,
        by=spec.by,
        duration=duration,
        scope="all",
        target_index=spec.target_index,
    )


@dataclass(frozen=True)
class SubspaceEvolution:
    """Closed-form target evolution within one control subspace.

    The two-level Hamiltonian is [[e_plus, -by], [-by, e_minus]] over the
    target states (|+>, |->) with e_plus - e_minus = delta - bx, giving the
    unitary exp(-i mean t) [cos(Omega t) I - i sin(Omega t)/Omega *
    ((delta_c/2) Z - by X)] with delta_c = delta - bx and the generalized
    Rabi frequency Omega = sqrt(delta_c^2/4 + by^2).
    """

    delta: float
    bx: float
    by: float
    e_plus: float
    e_minus: float
    duration: float
    unitary: np.ndarray

    @property
    def flip_probability(self) -> float:
        return float(np.abs(self.unitary[1, 0]) ** 2)


def analytic_subspace_evolution(
    delta: float, bx: float, by: float, e_plus: float, e_minus: float, t: float
) -> SubspaceEvolution:
    """Exact two-level evolution at fixed controls (static couplings).

    delta is the branch splitting from the Ising couplings, bx the
    longitudinal field, by the transverse drive, e_plus/e_minus the total
    diagonal energies of the two target branches (rad/s; consistent inputs
    satisfy e_plus - e_minus = delta - bx), t the pulse time (s).  The
    Omega -> 0 limit is handled by the sinc series, so resonant and
    drive-free inputs are exact.
    """
    if t < 0:
        raise ConfigError(f"time must be non-negative, got {t!r}")
    delta_c = delta - bx
    mean = 0.5 * (e_plus + e_minus)
    omega = math.sqrt(0.25 * delta_c**2 + by**2)
    cos_part = math.cos(omega * t)
    # sin(omega t)/omega via the normalized sinc, finite as omega -> 0.
    sinc_part = t * np.sinc(omega * t / math.pi)
    generator = np.array(
        [[0.5 * delta_c, -by], [-by, -0.5 * delta_c]], dtype=complex
    )
    unitary = np.exp(-1j * mean * t) * (
        cos_part * np.eye(2) - 1j * sinc_part * generator
    )
    return SubspaceEvolution(
        delta=delta,
        bx=bx,
        by=by,
        e_plus=e_plus,
        e_minus=e_minus,
        duration=t,
        unitary=unitary,
    )


def predicted_error_bound(delta: float, bx: float, by: float) -> float:
    """Leading off-resonant error scale by/|delta - bx|; inf on resonance."""
    gap = abs(delta - bx)
    if gap == 0.0:
        return math.inf
    return by / gap


@dataclass(frozen=True)
class GateReport:
    """Flip probabilities for every control pattern under one schedule.

    patterns: control strings in +/- form, in run order.
    p_flip / p_no_flip: target flip probabilities at the end of the pulse and
        their complements.
    schedule: the common field schedule.
    j0: coupling matrix used (rad/s); j_rms its RMS pair coupling.
    steps_accepted / steps_rejected / max_norm_drift: integrator statistics
        aggregated over the runs (sums and maximum respectively).
    notes: free-form remarks recorded by the runner (e.g. drive-scope
        documentation).
    """

    patterns: Tuple[str, ...]
    p_flip: Tuple[float, ...]
    p_no_flip: Tuple[float, ...]
    schedule: FieldSchedule
    j0: np.ndarray
    j_rms: float
    steps_accepted: int
    steps_rejected: int
    max_norm_drift: float
    notes: Tuple[str, ...] = ()

    @property
    def selected_index(self) -> int:
        return int(np.argmax(self.p_flip))

    @property
    def on_branch_infidelity(self) -> float:
        return 1.0 - max(self.p_flip)

    @property
    def worst_false_flip(self) -> float:
        others = [p for k, p in enumerate(self.p_flip) if k != self.selected_index]
        return max(others) if others else 0.0


def gate_report(
    model: ExchangeModel,
    schedule: FieldSchedule,
    results: Dict[Tuple[int, ...], Tuple[float, float]],
    statistics: Tuple[int, int, float] = (0, 0, 0.0),
    notes: Sequence[str] = (),
) -> GateReport:
    """Assemble the per-pattern flip table; all patterns must be present."""
    expected = control_patterns(model.n_ions - 1)
    missing = [p for p in expected if p not in results]
    if missing:
        raise ConfigError(
            f"incomplete results: missing control pattern "
            f"{_pattern_string(missing[0])} "
            f"({len(missing)} of {len(expected)} absent)"
        )
    patterns = tuple(_pattern_string(p) for p in expected)
    p_flip = tuple(float(results[p][0]) for p in expected)
    p_no_flip = tuple(float(results[p][1]) for p in expected)
    accepted, rejected, drift = statistics
    return GateReport(
        patterns=patterns,
        p_flip=p_flip,
        p_no_flip=p_no_flip,
        schedule=schedule,
        j0=model.j0,
        j_rms=model.j_rms,
        steps_accepted=accepted,
        steps_rejected=rejected,
        max_norm_drift=drift,
        notes=tuple(notes),
    )
