"""Benchmark the compiled propagation kernel against the NumPy fallback.

Runs one representative time-dependent pulse (two-control gate geometry,
CM-referenced drive) with the active backend, then re-runs the identical
workload in a subprocess with TRAPSIM_PURE_PY=1 and reports both step
rates and the speedup.  Usage:

    python3 benchmarks/bench_kernels.py [--n-ions 3] [--repeat 3]
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from trapsim.backend import kernel_name
from trapsim.crystal import IonCrystal, TrapConfig
from trapsim.dynamics import FieldSchedule, SpinState, evolve
from trapsim.exchange import ExchangeModel, LaserParams

TAU = 2.0 * np.pi


def build_workload(n_ions):
    crystal = IonCrystal.from_config(
        TrapConfig(n_ions=n_ions, omega_cm=TAU * 4.63975e6, anisotropy=0.1)
    )
    laser = LaserParams(
        rabi=TAU * 369.7e3,
        eta_cm=0.06,
        mu=1.0095 * crystal.config.omega_cm,
        mode_family="cm",
    )
    model = ExchangeModel.build(crystal, laser, modes="cm")
    by = TAU * 759.8
    fields = FieldSchedule(
        bx=-8.0 * model.j_rms,
        by=by,
        duration=0.5 * np.pi / by,
        scope="target",
        target_index=0,
    )
    initial = SpinState.from_pattern("+" + "-" * (n_ions - 1))
    return initial, model, fields


def measure(n_ions, repeat):
    initial, model, fields = build_workload(n_ions)
    best = None
    steps = 0
    for _ in range(repeat):
        start = time.perf_counter()
        trajectory = evolve(initial, model, fields, time_dependent=True, n_samples=2)
        elapsed = time.perf_counter() - start
        steps = trajectory.steps_accepted + trajectory.steps_rejected
        best = elapsed if best is None else min(best, elapsed)
    return {"backend": kernel_name(), "steps": steps, "seconds": best}


def report(result):
    rate = result["steps"] / result["seconds"]
    print(
        f"backend={result['backend']:<8}  steps={result['steps']:>9}  "
        f"wall={result['seconds']:8.3f} s  rate={rate:10.3e} steps/s"
    )
    return rate


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--n-ions", type=int, default=3)
    parser.add_argument("--repeat", type=int, default=3,
                        help="runs per backend; the best time is reported")
    parser.add_argument("--json", action="store_true",
                        help="print one JSON line for this backend and exit")
    args = parser.parse_args(argv)

    result = measure(args.n_ions, args.repeat)
    if args.json:
        print(json.dumps(result))
        return 0

    rate = report(result)
    if result["backend"] != "compiled":
        print("compiled kernel not active; no comparison run "
              "(build the extension and unset TRAPSIM_PURE_PY)")
        return 0

    env = dict(os.environ, TRAPSIM_PURE_PY="1")
    fallback = subprocess.run(
        [sys.executable, os.path.abspath(__file__), "--json",
         "--n-ions", str(args.n_ions), "--repeat", str(max(1, args.repeat - 1))],
        env=env, capture_output=True, text=True, check=True,
    )
    fallback_result = json.loads(fallback.stdout.strip().splitlines()[-1])
    fallback_rate = report(fallback_result)
    print(f"speedup: {rate / fallback_rate:.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
