"""Acceptance criteria against the bundled reference tables.

Each test prints one `ACCEPTANCE <n> (<label>): PASS|FAIL` line (run pytest
with -s to see them on passing tests) and then asserts, so a criterion that
misses tolerance fails loudly with the offending entries listed.  Reference
values are the bundled flip-probability tables; tolerances are per
criterion.  The runtime budgets assume the compiled kernel (see README).
"""

import math
import os
import time

import numpy as np
import pytest

from trapsim.crystal import IonCrystal, TrapConfig
from trapsim.dynamics import (
    FieldSchedule,
    SpinState,
    configuration_energies,
    evolve,
    flip_mask,
)
from trapsim.exchange import ExchangeModel, LaserParams, exchange_at
from trapsim.gates import analytic_subspace_evolution
from trapsim.scenarios import (
    build_scenario,
    bundled_config_path,
    parse_config,
    run_scenario,
)

TAU = 2 * np.pi

# --- reference data ---------------------------------------------------------

TABLE1_BY759 = {"--": 0.9986, "-+": 0.0373, "+-": 0.0373, "++": 0.0116}
TABLE1_BY7598 = {"--": 0.9992, "-+": 0.3640, "+-": 0.3640, "++": 0.5952}

TABLE2 = {
    "---": 0.99582, "--+": 0.00029, "-+-": 0.00029, "-++": 0.00004,
    "+--": 0.00029, "+-+": 0.00004, "++-": 0.00004, "+++": 0.00003,
}

TABLE3 = {
    "----": 0.99851, "---+": 0.00006, "--+-": 0.00006, "--++": 0.00004,
    "-+--": 0.00005, "-+-+": 0.00004, "-++-": 0.00004, "-+++": 0.00005,
    "+---": 0.00005, "+--+": 0.00004, "+-+-": 0.00004, "+-++": 0.00005,
    "++--": 0.00004, "++-+": 0.00003, "+++-": 0.00003, "++++": 0.00009,
}

TABLE4 = {
    "-----": 0.99223, "----+": 0.00027, "---+-": 0.00025, "---++": 0.00013,
    "--+--": 0.00025, "--+-+": 0.00013, "--++-": 0.00015, "--+++": 0.00979,
    "-+---": 0.00025, "-+--+": 0.00019, "-+-+-": 0.00019, "-+-++": 0.00898,
    "-++--": 0.00019, "-++-+": 0.00898, "-+++-": 0.00898, "-++++": 0.00002,
    "+----": 0.00025, "+---+": 0.00019, "+--+-": 0.00019, "+--++": 0.00898,
    "+-+--": 0.00019, "+-+-+": 0.00898, "+-++-": 0.00898, "+-+++": 0.00002,
    "++---": 0.00010, "++--+": 0.01366, "++-+-": 0.01030, "++-++": 0.00001,
    "+++--": 0.01030, "+++-+": 0.00001, "++++-": 0.00002, "+++++": 0.00001,
}

# Select-gate table: design pattern -> {control branch -> P_flip}.
TABLE5 = {
    "--": {"--": 0.9995, "-+": 0.0007, "+-": 0.0003, "++": 0.0006},
    "-+": {"--": 0.0005, "-+": 0.9997, "+-": 0.0001, "++": 0.0004},
    "+-": {"--": 0.0004, "-+": 0.0002, "+-": 0.9945, "++": 0.0007},
    "++": {"--": 0.0002, "-+": 0.0004, "+-": 0.0006, "++": 0.9972},
}

SELECT_CONFIGS = {
    "--": "select3_mm", "-+": "select3_zz", "+-": "select3_pm", "++": "select3_pp"
}


def _criterion(number, label, checks, extra=()):
    """Print the one-line verdict, detail the misses, then assert."""
    misses = [text for text, ok in checks if not ok]
    status = "FAIL" if misses else "PASS"
    print(f"\nACCEPTANCE {number} ({label}): {status} "
          f"[{len(checks) - len(misses)}/{len(checks)} checks]")
    for line in extra:
        print(f"  {line}")
    for text in misses:
        print(f"  MISS {text}")
    assert not misses, (
        f"criterion {number} ({label}): {len(misses)} of {len(checks)} "
        "checks out of tolerance:\n" + "\n".join(misses)
    )


def _run_bundled(name, tmp_path_factory):
    config = parse_config(bundled_config_path(name))
    out_dir = str(tmp_path_factory.mktemp(f"acc_{name}"))
    start = time.perf_counter()
    report = run_scenario(config, out_dir=out_dir)
    return report, time.perf_counter() - start, out_dir


@pytest.fixture(scope="module")
def scenario_runs(tmp_path_factory):
    """All table scenarios needed below, run once: name -> (report, seconds)."""
    names = [
        "toffoli2_by759", "toffoli2_by7598",
        "toffoli3_cm", "toffoli4_cm", "toffoli5_cm",
        "select3_mm", "select3_zz", "select3_pm", "select3_pp",
    ]
    return {name: _run_bundled(name, tmp_path_factory) for name in names}


@pytest.fixture(scope="module")
def long_pulse_runs():
    """On-branch 21*pi/2 pulse, static and time-dependent couplings."""
    results = {}
    for name, tdep in (("toffoli2_long21_static", False), ("toffoli2_long21", True)):
        config = parse_config(bundled_config_path(name))
        _, model, spec, schedule = build_scenario(config)
        trajectory = evolve(
            SpinState.from_pattern("+--"), model, schedule,
            time_dependent=tdep, n_samples=4,
        )
        flip = float(trajectory.target_probability_series(0)[-1, 1])
        results["time_dependent" if tdep else "static"] = (
            flip, trajectory.max_norm_drift
        )
    return results


@pytest.fixture(scope="module")
def oracle_comparison():
    """Static target-field runs versus the analytic two-level unitary.

    Returns (worst amplitude mismatch, worst norm drift) over 100 random
    draws each for n = 2 and n = 3.
    """
    rng = np.random.default_rng(2025)
    worst_amp = 0.0
    worst_drift = 0.0
    for n, target in ((2, 0), (3, 1)):
        dim = 2**n
        for _ in range(100):
            strengths = TAU * rng.uniform(200.0, 2000.0, size=(n, n))
            j0 = np.triu(strengths, 1)
            j0 = j0 + j0.T
            model = ExchangeModel(
                j0=j0,
                mode_omegas=np.zeros(0),
                mode_coeffs=np.zeros((0, n, n)),
                mu=1.0,
                j_rms=TAU * 900.0,
            )
            fields = FieldSchedule(
                bx=TAU * rng.uniform(-20000.0, 20000.0),
                by=TAU * 10 ** rng.uniform(1.3, 3.3),
                duration=rng.uniform(1e-4, 3e-3),
                scope="target",
                target_index=target,
            )
            raw = rng.normal(size=dim) + 1j * rng.normal(size=dim)
            initial = SpinState(raw / np.linalg.norm(raw))

            trajectory = evolve(
                initial, model, fields, time_dependent=False,
                n_samples=1, rtol=1e-10, atol=1e-12,
            )
            final = trajectory.amplitudes[-1]
            worst_drift = max(worst_drift, trajectory.max_norm_drift)

            # Analytic prediction: per control block, the exact two-level
            # unitary in the i^(number of minus spins) gauge, then back to
            # physical amplitudes.
            phases = np.array([1j ** bin(s).count("1") for s in range(dim)])
            gauged = np.conj(phases) * initial.amplitudes
            energies = configuration_energies(j0, fields.bx, n)
            mask = flip_mask(n, target)
            predicted = np.zeros(dim, dtype=complex)
            for s_plus in range(dim):
                if s_plus & mask:
                    continue
                s_minus = s_plus | mask
                e_p, e_m = energies[s_plus], energies[s_minus]
                delta = (e_p - e_m) + fields.bx
                evo = analytic_subspace_evolution(
                    delta, fields.bx, fields.by, e_p, e_m, fields.duration
                )
                block = evo.unitary @ np.array([gauged[s_plus], gauged[s_minus]])
                predicted[s_plus], predicted[s_minus] = block
            predicted = phases * predicted
            worst_amp = max(worst_amp, float(np.max(np.abs(final - predicted))))
    return worst_amp, worst_drift


# --- criteria ---------------------------------------------------------------


def test_criterion_1_mode_spectrum():
    start = time.perf_counter()
    crystal = IonCrystal.from_config(
        TrapConfig(n_ions=3, omega_cm=TAU * 4.63975e6, anisotropy=0.1)
    )
    ratios = crystal.transverse_ratios()
    zigzag = crystal.transverse[crystal.zigzag_index()]
    longitudinal = [mode.ratio for mode in crystal.longitudinal]
    elapsed = time.perf_counter() - start

    reference_vector = np.array([0.4082, -0.8164, 0.4082])
    checks = [
        (f"zigzag/CM ratio {ratios[-1]:.6f} vs 0.9879 +- 0.0005",
         abs(ratios[-1] - 0.9879) <= 0.0005),
        (f"longitudinal third ratio {longitudinal[2]:.6f} vs 2.408 +- 0.001",
         abs(longitudinal[2] - 2.408) <= 0.001),
        (f"runtime {elapsed:.3f}s < 1s", elapsed < 1.0),
    ]
    for k, (got, want) in enumerate(zip(zigzag.vector, reference_vector)):
        checks.append(
            (f"zigzag vector[{k}] {got:.6f} vs {want} +- 0.0005",
             abs(got - want) <= 0.0005)
        )
    _criterion(1, "mode spectrum", checks)


def test_criterion_2_exchange_scale():
    cases = [
        (3, 0.1, 1.0095, 926.019),
        (4, 0.2092, 1.00713, 926.307),
        (5, 0.1, 1.00571, 925.924),
        (6, 0.2092, 1.00476, 925.876),
    ]
    checks = []
    for n_ions, anisotropy, detuning, reference in cases:
        start = time.perf_counter()
        crystal = IonCrystal.from_config(
            TrapConfig(n_ions=n_ions, omega_cm=TAU * 4.63975e6, anisotropy=anisotropy)
        )
        laser = LaserParams(
            rabi=TAU * 369.7e3,
            eta_cm=0.06,
            mu=detuning * crystal.config.omega_cm,
            mode_family="cm",
        )
        model = ExchangeModel.build(crystal, laser, modes="cm")
        elapsed = time.perf_counter() - start
        j_rms_hz = model.j_rms / TAU
        relative = abs(j_rms_hz - reference) / reference
        checks.append(
            (f"N={n_ions} mu={detuning}w_CM: J_rms {j_rms_hz:.3f} Hz vs "
             f"{reference} +- 0.5% (rel {relative:.2e})", relative <= 0.005)
        )
        checks.append((f"N={n_ions} runtime {elapsed:.3f}s < 1s", elapsed < 1.0))
    _criterion(2, "exchange scale", checks)


def test_criterion_3_by_study_table(scenario_runs):
    checks = []
    elapsed = 0.0
    for name, reference, tol in (
        ("toffoli2_by759", TABLE1_BY759, 0.005),
        ("toffoli2_by7598", TABLE1_BY7598, 0.01),
    ):
        report, seconds, _ = scenario_runs[name]
        elapsed += seconds
        for pattern, p_flip in zip(report.patterns, report.p_flip):
            want = reference[pattern]
            checks.append(
                (f"{name} {pattern}: {p_flip:.5f} vs {want} +- {tol}",
                 abs(p_flip - want) <= tol)
            )
    checks.append((f"runtime {elapsed:.1f}s < 300s", elapsed < 300.0))
    _criterion(3, "two-control flip table vs drive strength", checks)


def test_criterion_4_multi_control_tables(scenario_runs):
    checks = []
    elapsed = 0.0
    for name, reference, off_tol in (
        ("toffoli3_cm", TABLE2, 0.005),
        ("toffoli4_cm", TABLE3, 0.005),
        ("toffoli5_cm", TABLE4, 0.01),
    ):
        report, seconds, _ = scenario_runs[name]
        elapsed += seconds
        on_branch = "-" * len(report.patterns[0])
        for pattern, p_flip in zip(report.patterns, report.p_flip):
            want = reference[pattern]
            if pattern == on_branch:
                checks.append(
                    (f"{name} on-branch {pattern}: {p_flip:.5f} vs {want} +- 0.005",
                     abs(p_flip - want) <= 0.005)
                )
            else:
                checks.append(
                    (f"{name} {pattern}: {p_flip:.5f} < 0.02 and vs {want} "
                     f"+- {off_tol}",
                     p_flip < 0.02 and abs(p_flip - want) <= off_tol)
                )
    checks.append((f"runtime {elapsed:.1f}s < 900s", elapsed < 900.0))
    _criterion(4, "three/four/five-control flip tables", checks)


def test_criterion_5_select_table(scenario_runs):
    checks = []
    elapsed = 0.0
    for design, name in SELECT_CONFIGS.items():
        report, seconds, _ = scenario_runs[name]
        elapsed += seconds
        reference = TABLE5[design]
        for pattern, p_flip in zip(report.patterns, report.p_flip):
            if pattern == design:
                want = reference[pattern]
                checks.append(
                    (f"design {design} diagonal: {p_flip:.5f} vs {want} +- 0.005",
                     abs(p_flip - want) <= 0.005)
                )
            else:
                checks.append(
                    (f"design {design} branch {pattern}: {p_flip:.5f} < 0.005",
                     p_flip < 0.005)
                )
    checks.append((f"runtime {elapsed:.1f}s < 300s", elapsed < 300.0))
    _criterion(5, "programmable select-gate table", checks)


def test_criterion_6_long_pulse_degradation(long_pulse_runs):
    tdep_flip, tdep_drift = long_pulse_runs["time_dependent"]
    static_flip, static_drift = long_pulse_runs["static"]
    checks = [
        (f"time-dependent 21pi/2 on-branch {tdep_flip:.5f} vs 0.8298 +- 0.02",
         abs(tdep_flip - 0.8298) <= 0.02),
        (f"static 21pi/2 on-branch {static_flip:.5f} vs 0.9591 +- 0.01",
         abs(static_flip - 0.9591) <= 0.01),
    ]
    extra = [
        f"drift: static {static_drift:.2e}, time-dependent {tdep_drift:.2e}",
        "note: with target-scope fields the static on-branch problem is "
        "exactly resonant, so sin^2(21pi/2) = 1 identically; the converged "
        "time-dependent value reflects only beat-modulation dephasing",
    ]
    _criterion(6, "21pi/2 long-pulse degradation", checks, extra=extra)


def test_criterion_7_oracle_equivalence(oracle_comparison):
    worst_amp, _ = oracle_comparison
    checks = [
        (f"worst amplitude mismatch {worst_amp:.2e} <= 1e-6 over 200 draws",
         worst_amp <= 1e-6)
    ]
    _criterion(7, "integrator vs closed-form subspace unitary", checks)


def test_criterion_8_invariant_suite(scenario_runs, long_pulse_runs, oracle_comparison):
    checks = []

    drifts = {
        name: report.max_norm_drift
        for name, (report, _, _) in scenario_runs.items()
    }
    drifts["long static"] = long_pulse_runs["static"][1]
    drifts["long time-dependent"] = long_pulse_runs["time_dependent"][1]
    drifts["oracle draws"] = oracle_comparison[1]
    worst_name = max(drifts, key=drifts.get)
    checks.append(
        (f"norm drift <= 1e-6 on every accepted run "
         f"(worst {drifts[worst_name]:.2e} on {worst_name})",
         all(value <= 1e-6 for value in drifts.values()))
    )

    # diagonal limit: by = 0 freezes every population
    n = 2
    j0 = TAU * 900.0 * (1.0 - np.eye(n))
    model = ExchangeModel(
        j0=j0, mode_omegas=np.zeros(0), mode_coeffs=np.zeros((0, n, n)),
        mu=1.0, j_rms=TAU * 900.0,
    )
    rng = np.random.default_rng(5)
    raw = rng.normal(size=4) + 1j * rng.normal(size=4)
    state = SpinState(raw / np.linalg.norm(raw))
    fields = FieldSchedule(bx=TAU * 500.0, by=0.0, duration=2e-3,
                           scope="all", target_index=0)
    trajectory = evolve(state, model, fields, time_dependent=False,
                        n_samples=16, rtol=1e-12, atol=1e-14)
    populations = np.abs(trajectory.amplitudes) ** 2
    wobble = float(np.max(np.abs(populations - populations[0])))
    checks.append((f"diagonal-limit population constancy {wobble:.2e} <= 1e-10",
                   wobble <= 1e-10))

    # mode orthonormality
    crystal = IonCrystal.from_config(
        TrapConfig(n_ions=5, omega_cm=TAU * 4.63975e6, anisotropy=0.1)
    )
    vectors = crystal.transverse_vectors()
    gram_error = float(np.max(np.abs(vectors @ vectors.T - np.eye(5))))
    checks.append((f"mode orthonormality {gram_error:.2e} <= 1e-10",
                   gram_error <= 1e-10))

    # J(0) = 0 exactly
    laser = LaserParams(rabi=TAU * 369.7e3, eta_cm=0.06,
                        mu=1.0095 * crystal.config.omega_cm, mode_family="cm")
    j_zero = exchange_at(crystal, laser, 0.0, modes="cm")
    checks.append(("J(0) = 0 exactly", bool(np.all(j_zero == 0.0))))

    # transverse stiffness identity T = (alpha^2 + 1/2) I - L/2, with
    # alpha = 1/anisotropy (transverse trap frequency in longitudinal units)
    from trapsim.crystal import longitudinal_stiffness, transverse_stiffness

    anisotropy = 0.2092
    alpha = 1.0 / anisotropy
    longitudinal = longitudinal_stiffness(crystal.positions)
    transverse = transverse_stiffness(crystal.positions, anisotropy)
    identity_error = float(np.max(np.abs(
        transverse - ((alpha**2 + 0.5) * np.eye(5) - 0.5 * longitudinal)
    )))
    checks.append((f"stiffness identity error {identity_error:.2e} <= 1e-12",
                   identity_error <= 1e-12))

    # i-phase: resonant flip amplitude carries phase pi/2 (X-state phases
    # i^(number of minus spins); modulo the global phase, which is zero here)
    by = TAU * 75.98
    t = (math.pi / 4) / by
    bare = ExchangeModel(j0=np.zeros((1, 1)), mode_omegas=np.zeros(0),
                         mode_coeffs=np.zeros((0, 1, 1)), mu=1.0, j_rms=0.0)
    fields = FieldSchedule(bx=0.0, by=by, duration=t, scope="all", target_index=0)
    trajectory = evolve(SpinState.from_pattern("+"), bare, fields,
                        time_dependent=False, n_samples=1, rtol=1e-10, atol=1e-12)
    gauged_flip = np.conj(1j) * trajectory.amplitudes[-1][1]
    phase_error = abs(gauged_flip - 1j * math.sin(by * t))
    checks.append((f"i-phase check error {phase_error:.2e} <= 1e-9",
                   phase_error <= 1e-9))

    _criterion(8, "invariant suite", checks)


def test_criterion_9_scope_documented(scenario_runs):
    report, _, out_dir = scenario_runs["toffoli2_by759"]
    note_text = " ".join(report.notes)
    with open(os.path.join(out_dir, "report.txt")) as handle:
        written = handle.read()
    checks = [
        ("report notes state the drive scope",
         "target" in note_text or "all ions" in note_text),
        ("report notes flag that the default all-ion scope does not "
         "reproduce the reference tables",
         "does not" in note_text and "reference tables" in note_text),
        ("the same note appears in the written report.txt",
         "does not" in written and "reference tables" in written),
    ]
    _criterion(9, "field-scope discrepancy documented in reports", checks)
