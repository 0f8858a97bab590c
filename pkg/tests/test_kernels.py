"""Compiled and pure-NumPy propagation kernels implement one contract.

Both backends use the same 3(2) pair, controller constants, and sampling
logic, so on identical inputs their trajectories agree to integrator
accuracy.  The environment variable TRAPSIM_PURE_PY must force the fallback
in a fresh interpreter.
"""

import os
import subprocess
import sys

import numpy as np
import pytest

from trapsim import _kernel_py, backend
from trapsim.errors import IntegrationError

TAU = 2 * np.pi


def random_problem(rng, n_ions, time_dep=True):
    dim = 2**n_ions
    psi0 = rng.normal(size=dim) + 1j * rng.normal(size=dim)
    psi0 /= np.linalg.norm(psi0)
    d0 = TAU * rng.uniform(-8e3, 8e3, size=dim)
    d0 -= 0.5 * (d0.max() + d0.min())
    omega = TAU * 4.63975e6
    mu = 1.0095 * omega
    if time_dep:
        qmat = TAU * rng.uniform(-200.0, 200.0, size=(1, dim)) / omega
        omegas = np.array([omega])
    else:
        qmat = np.zeros((0, dim))
        omegas = np.zeros(0)
    by = TAU * rng.uniform(50.0, 800.0)
    masks = np.array([1 << (n_ions - 1)], dtype=np.int64)
    duration = rng.uniform(2e-5, 6e-5)
    sample_times = np.linspace(0.0, duration, 8)[1:]
    return psi0, d0, qmat, omegas, mu, by, masks, sample_times


def run_kernel(impl, problem, rtol=1e-8, atol=1e-10):
    psi0, d0, qmat, omegas, mu, by, masks, sample_times = problem
    return impl.propagate(
        psi0.copy(), d0, qmat, omegas, mu, by, masks, sample_times, rtol, atol
    )


def test_backend_reports_a_known_kernel():
    assert backend.kernel_name() in ("compiled", "python")


def test_env_override_forces_python_kernel():
    code = (
        "from trapsim.backend import kernel_name; print(kernel_name())"
    )
    env = dict(os.environ, TRAPSIM_PURE_PY="1")
    result = subprocess.run(
        [sys.executable, "-c", code], env=env, capture_output=True, text=True
    )
    assert result.returncode == 0, result.stderr
    assert result.stdout.strip() == "python"


@pytest.mark.parametrize("n_ions", [2, 3])
@pytest.mark.parametrize("time_dep", [False, True])
def test_compiled_matches_python(n_ions, time_dep):
    compiled = pytest.importorskip("trapsim._kernel")
    rng = np.random.default_rng(100 + n_ions)
    for _ in range(5):
        problem = random_problem(rng, n_ions, time_dep=time_dep)
        samples_c, acc_c, rej_c, drift_c = run_kernel(compiled, problem)
        samples_p, acc_p, rej_p, drift_p = run_kernel(_kernel_py, problem)
        assert np.max(np.abs(samples_c - samples_p)) < 1e-7
        assert drift_c < 1e-6 and drift_p < 1e-6
        # same algorithm and controller: step counts agree up to the
        # occasional accept/reject edge flipped by summation-order rounding
        assert abs(acc_c - acc_p) <= max(2, acc_p // 100)


def test_static_two_level_rabi_formula():
    # One driven spin, static detuning: P_flip = by^2/W^2 sin^2(W t) exactly.
    delta = TAU * 500.0
    by = TAU * 200.0
    d0 = np.array([0.5 * delta, -0.5 * delta])
    duration = 3e-3
    sample_times = np.linspace(0.0, duration, 50)[1:]
    psi0 = np.array([1.0 + 0.0j, 0.0j])
    samples, _, _, drift = backend.propagate(
        psi0,
        d0,
        np.zeros((0, 2)),
        np.zeros(0),
        1.0,
        by,
        np.array([1], dtype=np.int64),
        sample_times,
        1e-10,
        1e-12,
    )
    rabi = np.hypot(0.5 * delta, by)
    expected = (by / rabi) ** 2 * np.sin(rabi * sample_times) ** 2
    assert np.max(np.abs(np.abs(samples[:, 1]) ** 2 - expected)) < 1e-8
    assert drift < 1e-8


def test_sampling_does_not_perturb_solution():
    rng = np.random.default_rng(42)
    problem = random_problem(rng, 2, time_dep=True)
    dense = run_kernel(backend, problem)[0]
    sparse_problem = problem[:-1] + (problem[-1][-1:],)
    sparse = run_kernel(backend, sparse_problem)[0]
    assert np.max(np.abs(dense[-1] - sparse[-1])) < 1e-7


def test_zero_by_preserves_populations():
    rng = np.random.default_rng(5)
    psi0 = rng.normal(size=4) + 1j * rng.normal(size=4)
    psi0 /= np.linalg.norm(psi0)
    d0 = TAU * np.array([3e3, -1e3, -2e3, 0.0])
    sample_times = np.array([1e-4, 2.5e-4])
    samples, _, _, _ = backend.propagate(
        psi0.copy(),
        d0,
        np.zeros((0, 4)),
        np.zeros(0),
        1.0,
        0.0,
        np.array([2], dtype=np.int64),
        sample_times,
        1e-12,
        1e-14,
    )
    for row in samples:
        assert np.max(np.abs(np.abs(row) ** 2 - np.abs(psi0) ** 2)) < 1e-10


def test_step_underflow_raises():
    # An absurd diagonal scale forces steps below the representable fraction
    # of the duration; the kernel must abort rather than loop forever.
    psi0 = np.array([1.0 + 0.0j, 0.0j])
    d0 = np.array([1e14, -1e14])
    with pytest.raises(IntegrationError):
        backend.propagate(
            psi0,
            d0,
            np.zeros((0, 2)),
            np.zeros(0),
            1.0,
            TAU * 75.98,
            np.array([1], dtype=np.int64),
            np.array([1.0]),
            1e-12,
            1e-14,
        )
