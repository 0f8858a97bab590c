"""Configuration-driven scenario runner.

A scenario is a flat key = value text file describing one gate experiment:
crystal size and trap, drive parameters, gate branch selection, pulse, and
output location.  Frequencies in configs are cyclic (Hz); they are converted
to angular units internally.  Ion numbering in configs is 1-based to match
the usual site labeling; the Python API underneath is 0-based.

Empty lines and lines starting with # are ignored; inline comments after #
are stripped.  Parse errors carry file and line numbers.

Keys (* = required for run/sweep; defaults in parentheses):
    n_ions*            total ions, target + controls
    target_index       site of the target ion, 1-based (1)
    omega_cm_hz*       transverse CM mode frequency, Hz
    anisotropy         longitudinal/transverse CM ratio (0.1 if n_ions is
                       odd, 0.2092 if even)
    eta_cm*            Lamb-Dicke parameter at the CM mode
    rabi_hz*           per-ion Rabi frequency, Hz
    mode_reference     which transverse mode the drive references, cm|zigzag
                       (cm)
    detuning_ratio*    beatnote over the referenced mode frequency
    by_hz*             transverse field amplitude, Hz
    bx_mode            auto|explicit (auto): auto sets bx to the selected
                       branch splitting, explicit uses bx_hz
    bx_hz              longitudinal field amplitude, Hz (explicit mode only)
    allow_branch_overlap  true|false (false): skip the branch-addressability
                       check, for deliberate strong-field mixing studies
    selected_controls* control pattern whose target flips, e.g. "--" (also
                       accepts pm letters)
    exchange           static|time_dependent (time_dependent)
    pulse_multiple     odd multiple of the pi/2 transverse pulse area (1)
    samples            trajectory samples per run (200)
    field_scope        ions driven by the transverse field, all|target (all)
    mode_sum           phonon modes in the exchange sum: single = the
                       referenced mode only, all = every mode (single);
                       the bundled reference tables assume single
    rel_tol, abs_tol   integrator tolerances (1e-8, 1e-10)
    out_dir            output directory ("out"); the TRAPSIM_OUT environment
                       variable overrides it
"""

import csv
import dataclasses
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from . import backend
from .crystal import IonCrystal, TrapConfig
from .dynamics import FieldSchedule, SpinState, Trajectory, evolve
from .errors import ConfigError
from .exchange import ExchangeModel, LaserParams, j_rms_doubled
from .gates import GateReport, GateSpec, control_patterns, design_gate, gate_report

TAU = 2.0 * math.pi

_SCOPE_NOTE_TARGET = (
    "transverse drive restricted to the target ion (block-diagonal model); "
    "the all-ion default drives control-spin transitions and does not "
    "reproduce the bundled reference tables"
)
_SCOPE_NOTE_ALL = "transverse drive applied to all ions (default scope)"


@dataclass(frozen=True)
class ScenarioConfig:
    """Parsed scenario; see the module docstring for key meanings."""

    n_ions: int
    target_index: int = 1
    omega_cm_hz: Optional[float] = None
    anisotropy: Optional[float] = None
    eta_cm: Optional[float] = None
    rabi_hz: Optional[float] = None
    mode_reference: str = "cm"
    detuning_ratio: Optional[float] = None
    by_hz: Optional[float] = None
    bx_mode: str = "auto"
    bx_hz: Optional[float] = None
    allow_branch_overlap: bool = False
    selected_controls: Optional[str] = None
    exchange: str = "time_dependent"
    pulse_multiple: int = 1
    samples: int = 200
    field_scope: str = "all"
    mode_sum: str = "single"
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    out_dir: str = "out"
    source: str = "<memory>"

    def effective_anisotropy(self) -> float:
        if self.anisotropy is not None:
            return self.anisotropy
        return 0.1 if self.n_ions % 2 else 0.2092

    def control_string(self) -> str:
        return _normalize_pattern(self.selected_controls or "")


_CHOICE_KEYS = {
    "mode_reference": ("cm", "zigzag"),
    "bx_mode": ("auto", "explicit"),
    "exchange": ("static", "time_dependent"),
    "field_scope": ("all", "target"),
    "mode_sum": ("single", "all"),
}

_INT_KEYS = ("n_ions", "target_index", "pulse_multiple", "samples")
_FLOAT_KEYS = (
    "omega_cm_hz",
    "anisotropy",
    "eta_cm",
    "rabi_hz",
    "detuning_ratio",
    "by_hz",
    "bx_hz",
    "rel_tol",
    "abs_tol",
)
_STRING_KEYS = ("selected_controls", "out_dir")
_BOOL_KEYS = ("allow_branch_overlap",)

# Keys the sweep subcommand may vary, with their parsers.
SWEEPABLE_KEYS = {key: int for key in _INT_KEYS}
SWEEPABLE_KEYS.update({key: float for key in _FLOAT_KEYS})

_RUN_REQUIRED = (
    "omega_cm_hz",
    "eta_cm",
    "rabi_hz",
    "detuning_ratio",
    "by_hz",
    "selected_controls",
)


def _normalize_pattern(pattern: str) -> str:
    out = []
    for char in pattern:
        if char in "+p":
            out.append("+")
        elif char in "-m":
            out.append("-")
        else:
            raise ConfigError(
                f"control patterns may contain only + - p m, got {pattern!r}"
            )
    return "".join(out)


def _pm_string(pattern: str) -> str:
    return pattern.replace("+", "p").replace("-", "m")


def parse_config(path) -> ScenarioConfig:
    """Read and validate a scenario file; errors carry file:line context."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    values: Dict[str, object] = {}
    for line_number, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(
                f"{path}:{line_number}: expected key = value, got {raw_line.strip()!r}"
            )
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        where = f"{path}:{line_number}"
        if key in values:
            raise ConfigError(f"{where}: duplicate key {key!r}")
        if key in _INT_KEYS:
            try:
                values[key] = int(value)
            except ValueError:
                raise ConfigError(
                    f"{where}: {key} must be an integer, got {value!r}"
                ) from None
        elif key in _FLOAT_KEYS:
            try:
                values[key] = float(value)
            except ValueError:
                raise ConfigError(
                    f"{where}: {key} must be a number, got {value!r}"
                ) from None
        elif key in _CHOICE_KEYS:
            if value not in _CHOICE_KEYS[key]:
                choices = "|".join(_CHOICE_KEYS[key])
                raise ConfigError(
                    f"{where}: {key} must be one of {choices}, got {value!r}"
                )
            values[key] = value
        elif key in _BOOL_KEYS:
            lowered = value.lower()
            if lowered not in ("true", "false"):
                raise ConfigError(
                    f"{where}: {key} must be true or false, got {value!r}"
                )
            values[key] = lowered == "true"
        elif key in _STRING_KEYS:
            values[key] = value
        else:
            raise ConfigError(f"{where}: unknown key {key!r}")
    if "n_ions" not in values:
        raise ConfigError(f"{path}: missing required key 'n_ions'")
    config = ScenarioConfig(source=str(path), **values)
    _validate_config(config)
    return config


def _validate_config(config: ScenarioConfig) -> None:
    where = config.source
    if config.n_ions < 1:
        raise ConfigError(f"{where}: n_ions must be >= 1, got {config.n_ions}")
    if not 1 <= config.target_index <= config.n_ions:
        raise ConfigError(
            f"{where}: target_index must be in 1..{config.n_ions}, "
            f"got {config.target_index}"
        )
    for key in ("omega_cm_hz", "rabi_hz", "by_hz", "detuning_ratio", "eta_cm"):
        value = getattr(config, key)
        if value is not None and not value > 0:
            raise ConfigError(f"{where}: {key} must be positive, got {value}")
    anisotropy = config.anisotropy
    if anisotropy is not None and not 0 < anisotropy < 1:
        raise ConfigError(
            f"{where}: anisotropy must lie in (0, 1), got {anisotropy}"
        )
    if config.selected_controls is not None:
        pattern = _normalize_pattern(config.selected_controls)
        if len(pattern) != config.n_ions - 1:
            raise ConfigError(
                f"{where}: selected_controls must list {config.n_ions - 1} "
                f"control spins for n_ions = {config.n_ions}, "
                f"got {config.selected_controls!r}"
            )
    if config.pulse_multiple < 1 or config.pulse_multiple % 2 == 0:
        raise ConfigError(
            f"{where}: pulse_multiple must be a positive odd integer, "
            f"got {config.pulse_multiple}"
        )
    if config.samples < 1:
        raise ConfigError(f"{where}: samples must be >= 1, got {config.samples}")
    if config.bx_mode == "explicit" and config.bx_hz is None:
        raise ConfigError(f"{where}: bx_mode = explicit requires bx_hz")
    if not (config.rel_tol > 0 and config.abs_tol > 0):
        raise ConfigError(f"{where}: rel_tol and abs_tol must be positive")


def _require_run_keys(config: ScenarioConfig) -> None:
    missing = [key for key in _RUN_REQUIRED if getattr(config, key) is None]
    if missing:
        raise ConfigError(
            f"{config.source}: missing required key(s) for a gate run: "
            + ", ".join(missing)
        )


def build_scenario(
    config: ScenarioConfig,
) -> Tuple[IonCrystal, ExchangeModel, GateSpec, FieldSchedule]:
    """Crystal, exchange model, gate spec, and schedule for one scenario."""
    _require_run_keys(config)
    crystal = IonCrystal.from_config(
        TrapConfig(
            n_ions=config.n_ions,
            omega_cm=TAU * config.omega_cm_hz,
            anisotropy=config.effective_anisotropy(),
        )
    )
    if config.mode_reference == "zigzag":
        reference_omega = crystal.transverse_frequency(crystal.zigzag_index())
    else:
        reference_omega = crystal.config.omega_cm
    laser = LaserParams(
        rabi=TAU * config.rabi_hz,
        eta_cm=config.eta_cm,
        mu=config.detuning_ratio * reference_omega,
        mode_family=config.mode_reference,
    )
    modes = config.mode_reference if config.mode_sum == "single" else "all"
    model = ExchangeModel.build(crystal, laser, modes=modes)
    pattern = config.control_string()
    spec = GateSpec(
        kind="select" if config.mode_reference == "zigzag" else "toffoli",
        target_index=config.target_index - 1,
        selected_controls=tuple(1 if c == "+" else -1 for c in pattern),
        by=TAU * config.by_hz,
        mode_reference=config.mode_reference,
        detuning_ratio=config.detuning_ratio,
        pulse_multiple=config.pulse_multiple,
    )
    if config.bx_mode == "auto":
        schedule = design_gate(
            spec, model, enforce_separation=not config.allow_branch_overlap
        )
    else:
        schedule = FieldSchedule(
            bx=TAU * config.bx_hz,
            by=spec.by,
            duration=spec.pulse_multiple * (math.pi / 2.0) / spec.by,
            scope="all",
            target_index=spec.target_index,
        )
    schedule = dataclasses.replace(schedule, scope=config.field_scope)
    return crystal, model, spec, schedule


def resolve_out_dir(config: ScenarioConfig, override: Optional[str] = None) -> Path:
    """Output directory precedence: CLI override > TRAPSIM_OUT > config."""
    if override:
        return Path(override)
    env = os.environ.get("TRAPSIM_OUT")
    if env:
        return Path(env)
    return Path(config.out_dir)


def _initial_pattern(config: ScenarioConfig, controls: Sequence[int]) -> str:
    """Full spin string with the target inserted at its site, controls around."""
    chars = ["+" if sign > 0 else "-" for sign in controls]
    chars.insert(config.target_index - 1, "+")
    return "".join(chars)


def run_scenario(
    config: ScenarioConfig,
    out_dir: Optional[str] = None,
    plot: bool = False,
) -> GateReport:
    """Run every control pattern of one scenario and write the artifacts.

    Produces, under the resolved output directory: trace_<pattern>.csv per
    control pattern (columns t_seconds, p_target_plus, p_target_minus,
    norm_drift), report.txt, and report.csv.  Deterministic for a fixed
    config and build.
    """
    crystal, model, spec, schedule = build_scenario(config)
    directory = resolve_out_dir(config, out_dir)
    directory.mkdir(parents=True, exist_ok=True)

    time_dependent = config.exchange == "time_dependent"
    target0 = spec.target_index
    patterns = control_patterns(config.n_ions - 1)
    results: Dict[Tuple[int, ...], Tuple[float, float]] = {}
    trajectories: Dict[Tuple[int, ...], Trajectory] = {}
    total_accepted = total_rejected = 0
    worst_drift = 0.0
    for controls in patterns:
        initial = SpinState.from_pattern(_initial_pattern(config, controls))
        trajectory = evolve(
            initial,
            model,
            schedule,
            time_dependent=time_dependent,
            n_samples=config.samples,
            rtol=config.rel_tol,
            atol=config.abs_tol,
        )
        series = trajectory.target_probability_series(target0)
        # The target starts in |+>; the flip probability is defined as
        # 1 - P(still +) so each report row sums to exactly 1 even in the
        # presence of integrator norm drift.
        p_keep = float(series[-1, 0])
        results[controls] = (1.0 - p_keep, p_keep)
        trajectories[controls] = trajectory
        total_accepted += trajectory.steps_accepted
        total_rejected += trajectory.steps_rejected
        worst_drift = max(worst_drift, trajectory.max_norm_drift)
        _write_trace(directory, controls, trajectory, target0)

    notes = [
        _SCOPE_NOTE_TARGET if schedule.scope == "target" else _SCOPE_NOTE_ALL,
        f"exchange couplings: {config.exchange}, mode sum: {config.mode_sum} "
        f"({config.mode_reference})",
    ]
    report = gate_report(
        model,
        schedule,
        results,
        statistics=(total_accepted, total_rejected, worst_drift),
        notes=notes,
    )
    _write_report(directory, config, crystal, report)
    if plot:
        for controls, trajectory in trajectories.items():
            _write_plot(directory, controls, trajectory, target0)
    return report


def _write_trace(
    directory: Path,
    controls: Sequence[int],
    trajectory: Trajectory,
    target0: int,
) -> None:
    pattern = _pm_string("".join("+" if s > 0 else "-" for s in controls))
    series = trajectory.target_probability_series(target0)
    drifts = trajectory.norm_drifts()
    with open(directory / f"trace_{pattern}.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t_seconds", "p_target_plus", "p_target_minus", "norm_drift"])
        for k, t in enumerate(trajectory.times):
            writer.writerow(
                [
                    f"{t:.12e}",
                    f"{series[k, 0]:.12e}",
                    f"{series[k, 1]:.12e}",
                    f"{drifts[k]:.6e}",
                ]
            )


def _format_j0(j0: np.ndarray) -> List[str]:
    lines = []
    for row in np.asarray(j0) / TAU:
        lines.append("  " + "  ".join(f"{value:12.4f}" for value in row))
    return lines


def _write_report(
    directory: Path,
    config: ScenarioConfig,
    crystal: IonCrystal,
    report: GateReport,
) -> None:
    schedule = report.schedule
    lines = [
        "gate report",
        "===========",
        f"config: {config.source}",
        f"kernel: {backend.kernel_name()}",
        f"crystal: {config.n_ions} ions, anisotropy "
        f"{crystal.config.anisotropy}, omega_cm/2pi = "
        f"{crystal.config.omega_cm / TAU:.3f} Hz",
        f"drive: eta_cm = {config.eta_cm}, rabi/2pi = {config.rabi_hz:.3f} Hz, "
        f"detuning_ratio = {config.detuning_ratio} ({config.mode_reference})",
        f"schedule: bx/2pi = {schedule.bx / TAU:.6f} Hz, "
        f"by/2pi = {schedule.by / TAU:.6f} Hz, "
        f"duration = {schedule.duration:.9e} s, scope = {schedule.scope}",
        f"target ion: {config.target_index} (1-based)",
        f"J_rms/2pi = {report.j_rms / TAU:.6f} Hz "
        f"(doubled-pair convention: {j_rms_doubled(report.j0) / TAU:.6f} Hz)",
        "couplings J0/2pi (Hz):",
        *_format_j0(report.j0),
        "",
        "pattern  p_flip          p_no_flip",
    ]
    for pattern, p_flip, p_no_flip in zip(
        report.patterns, report.p_flip, report.p_no_flip
    ):
        lines.append(f"{pattern:<8} {p_flip:<15.12f} {p_no_flip:<15.12f}")
    lines += [
        "",
        f"selected branch: {report.patterns[report.selected_index]}",
        f"on-branch infidelity: {report.on_branch_infidelity:.6e}",
        f"worst false flip: {report.worst_false_flip:.6e}",
        f"integrator: {report.steps_accepted} accepted, "
        f"{report.steps_rejected} rejected, "
        f"max norm drift {report.max_norm_drift:.3e}",
    ]
    lines += [f"note: {note}" for note in report.notes]
    (directory / "report.txt").write_text("\n".join(lines) + "\n")

    with open(directory / "report.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["pattern", "p_flip", "p_no_flip"])
        for pattern, p_flip, p_no_flip in zip(
            report.patterns, report.p_flip, report.p_no_flip
        ):
            writer.writerow([pattern, f"{p_flip:.12e}", f"{p_no_flip:.12e}"])


def _write_plot(
    directory: Path,
    controls: Sequence[int],
    trajectory: Trajectory,
    target0: int,
) -> None:
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError as exc:
        raise ConfigError(
            "plot output requires matplotlib (install the 'plot' extra)"
        ) from exc
    pattern = _pm_string("".join("+" if s > 0 else "-" for s in controls))
    series = trajectory.target_probability_series(target0)
    figure, axes = plt.subplots(figsize=(6, 4))
    axes.plot(trajectory.times * 1e3, series[:, 0], label="P(target +)")
    axes.plot(trajectory.times * 1e3, series[:, 1], "--", label="P(target -)")
    axes.set_xlabel("time (ms)")
    axes.set_ylabel("probability")
    axes.set_ylim(-0.02, 1.02)
    axes.set_title(f"controls {pattern}")
    axes.legend(loc="best")
    figure.tight_layout()
    figure.savefig(directory / f"plot_{pattern}.svg")
    plt.close(figure)


def sweep_scenario(
    config: ScenarioConfig,
    key: str,
    values: Sequence[str],
    out_dir: Optional[str] = None,
    plot: bool = False,
) -> Path:
    """Run the scenario once per value of one numeric key.

    Each run writes into <out>/<key>_<value>/; the summary CSV (one line per
    value and control pattern) is written to <out>/sweep_<key>.csv and its
    path returned.
    """
    if key not in SWEEPABLE_KEYS:
        raise ConfigError(
            f"key {key!r} is not sweepable; numeric keys are: "
            + ", ".join(sorted(SWEEPABLE_KEYS))
        )
    parser = SWEEPABLE_KEYS[key]
    directory = resolve_out_dir(config, out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    summary_path = directory / f"sweep_{key}.csv"
    with open(summary_path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["value", "pattern", "p_flip", "p_no_flip"])
        for raw_value in values:
            try:
                value = parser(raw_value)
            except ValueError:
                raise ConfigError(
                    f"sweep value {raw_value!r} is not a valid {parser.__name__} "
                    f"for key {key!r}"
                ) from None
            point = dataclasses.replace(config, **{key: value})
            _validate_config(point)
            label = f"{value:g}" if isinstance(value, float) else str(value)
            report = run_scenario(
                point, out_dir=str(directory / f"{key}_{label}"), plot=plot
            )
            for pattern, p_flip, p_no_flip in zip(
                report.patterns, report.p_flip, report.p_no_flip
            ):
                writer.writerow(
                    [label, pattern, f"{p_flip:.12e}", f"{p_no_flip:.12e}"]
                )
    return summary_path


def describe_modes(config: ScenarioConfig) -> str:
    """Human-readable table of equilibrium positions and both mode families."""
    crystal = IonCrystal.from_config(
        TrapConfig(
            n_ions=config.n_ions,
            omega_cm=TAU * (config.omega_cm_hz or 1.0 / TAU),
            anisotropy=config.effective_anisotropy(),
        )
    )
    lines = [
        f"crystal: {config.n_ions} ions, anisotropy "
        f"{crystal.config.anisotropy}",
        "equilibrium positions (Coulomb-length units):",
        "  " + "  ".join(f"{u: .6f}" for u in crystal.positions),
        "",
        "transverse modes (ratio to transverse CM; descending):",
    ]
    for index, mode in enumerate(crystal.transverse):
        vector = "  ".join(f"{b: .6f}" for b in mode.vector)
        lines.append(f"  {index + 1}: ratio {mode.ratio:.6f}  vector [{vector}]")
    lines.append("")
    lines.append("longitudinal modes (ratio to longitudinal CM; ascending):")
    for index, mode in enumerate(crystal.longitudinal):
        vector = "  ".join(f"{b: .6f}" for b in mode.vector)
        lines.append(f"  {index + 1}: ratio {mode.ratio:.6f}  vector [{vector}]")
    return "\n".join(lines)


def bundled_config_names() -> List[str]:
    """Names (stems) of the packaged scenario files."""
    from importlib import resources

    root = resources.files("trapsim") / "configs"
    return sorted(
        entry.name[: -len(".cfg")]
        for entry in root.iterdir()
        if entry.name.endswith(".cfg")
    )


def bundled_config_path(name: str):
    """Filesystem path of one packaged scenario file."""
    from importlib import resources

    path = resources.files("trapsim") / "configs" / f"{name}.cfg"
    if not path.is_file():
        raise ConfigError(
            f"no bundled config named {name!r}; available: "
            + ", ".join(bundled_config_names())
        )
    return path


def resolve_config_path(argument) -> Path:
    """Interpret a CLI config argument as a file path or a bundled name."""
    path = Path(argument)
    if path.exists():
        return path
    stem = path.name[: -len(".cfg")] if path.name.endswith(".cfg") else path.name
    if path.parent == Path(".") and stem in bundled_config_names():
        return Path(str(bundled_config_path(stem)))
    raise ConfigError(
        f"config {argument!r} is neither a readable file nor a bundled "
        f"config name; bundled: " + ", ".join(bundled_config_names())
    )


def bundled_table_names() -> List[str]:
    """Bundled scenarios that belong to the reference flip-probability tables.

    Long-pulse studies (pulse_multiple > 1) are degradation scans rather than
    table entries and take far longer to integrate, so the tables command
    leaves them to explicit `run` invocations.
    """
    names = []
    for name in bundled_config_names():
        config = parse_config(bundled_config_path(name))
        if config.pulse_multiple == 1:
            names.append(name)
    return names


def run_bundled_tables(
    out_dir: Optional[str] = None, plot: bool = False
) -> List[Tuple[str, GateReport]]:
    """Run every bundled table scenario; returns (name, report) pairs in name order."""
    base = Path(out_dir) if out_dir else resolve_out_dir(ScenarioConfig(n_ions=2))
    reports = []
    for name in bundled_table_names():
        config = parse_config(bundled_config_path(name))
        report = run_scenario(config, out_dir=str(base / name), plot=plot)
        reports.append((name, report))
    return reports
