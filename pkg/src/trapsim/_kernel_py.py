"""Pure-NumPy propagation kernel (fallback when the compiled one is absent).

Integrates  dpsi/dt = -i H(t) psi  in the X-product basis, where

    H(t) = diag( d0[s] + sum_m br_m(t) * qmat[m, s] ) - by * sum_k FLIP_k,

FLIP_k exchanges the two states of driven spin k (basis index XOR mask_k) and
br_m(t) = -w_m cos(2 mu t) - 2 mu sin(w_m t) sin(mu t) is the zero-mean part
of the per-mode exchange bracket.  The X-basis states carry phases i^(number
of minus spins), which makes the transverse-field matrix elements real (-by)
and H real symmetric; probabilities are unaffected by that gauge.

The stepper is an embedded Bogacki-Shampine 3(2) Runge-Kutta pair with the
first-same-as-last property, a PI step-size controller, and exact hitting of
the requested sample times.  The state is never renormalized; the maximum
norm drift is reported so callers can enforce their budget.

This module and the compiled extension implement the same algorithm with the
same coefficients; either can serve as the backend (see trapsim.backend).
"""

from typing import Tuple

import numpy as np

from .errors import IntegrationError

# Embedded 3(2) pair: third-order solution weights and the error weights
# (difference to the embedded second-order solution).
_B1, _B2, _B3 = 2.0 / 9.0, 1.0 / 3.0, 4.0 / 9.0
_E1, _E2, _E3, _E4 = -5.0 / 72.0, 1.0 / 12.0, 1.0 / 9.0, -1.0 / 8.0

_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents for an order-3 method.
_ALPHA = 0.7 / 3.0
_BETA = 0.4 / 3.0


def _brackets(omegas: np.ndarray, mu: float, t: float) -> np.ndarray:
    """Zero-mean time factor of each mode's exchange bracket."""
    return -omegas * np.cos(2.0 * mu * t) - 2.0 * mu * np.sin(omegas * t) * np.sin(
        mu * t
    )


def propagate(
    psi0: np.ndarray,
    d0: np.ndarray,
    qmat: np.ndarray,
    omegas: np.ndarray,
    mu: float,
    by: float,
    flip_masks: np.ndarray,
    sample_times: np.ndarray,
    rtol: float,
    atol: float,
) -> Tuple[np.ndarray, int, int, float]:
    """Propagate psi0 and return (samples, accepted, rejected, max_drift).

    psi0: complex amplitudes, shape (dim,).
    d0: static diagonal energies (rad/s), shape (dim,); callers should center
        these (subtract the midrange) and restore the phase afterwards.
    qmat: per-mode diagonal modulation patterns, shape (M, dim); M = 0 means
        a time-independent Hamiltonian.
    omegas, mu: mode and beatnote angular frequencies (rad/s) for br_m(t).
    by: transverse field amplitude (rad/s).
    flip_masks: basis-index XOR masks of the driven spins, shape (K,).
    sample_times: strictly increasing times (s), all > 0; the last one is the
        integration endpoint.  Returned samples have shape (S, dim).
    """
    dim = psi0.shape[0]
    n_modes = qmat.shape[0]
    time_dep = n_modes > 0
    duration = float(sample_times[-1])

    flip_index = [np.arange(dim) ^ int(mask) for mask in flip_masks]

    def rhs(t: float, y: np.ndarray) -> np.ndarray:
        if time_dep:
            diag = d0 + _brackets(omegas, mu, t) @ qmat
        else:
            diag = d0
        out = (-1j) * (diag * y)
        for index in flip_index:
            out += (1j * by) * y[index]
        return out

    # Initial step sized to resolve the fastest scale present.
    fastest = max(float(np.max(np.abs(d0))) if dim else 0.0, abs(by), 1.0 / duration)
    if time_dep:
        fastest = max(fastest, 2.0 * mu)
    h = min(duration / 10.0, 0.05 / fastest)

    t = 0.0
    y = psi0.astype(np.complex128, copy=True)
    k1 = rhs(t, y)
    samples = np.empty((len(sample_times), dim), dtype=np.complex128)
    sample_at = 0
    accepted = rejected = 0
    max_drift = 0.0
    err_prev = 1.0

    while sample_at < len(sample_times):
        target = float(sample_times[sample_at])
        if target - t <= 1e-18 * max(1.0, target):
            samples[sample_at] = y
            sample_at += 1
            continue
        if h < 1e-16 * duration:
            raise IntegrationError(
                f"step size underflow at t = {t:.6e} s (h = {h:.3e} s); "
                f"tolerances rtol={rtol:.1e}, atol={atol:.1e} may be too tight"
            )
        hitting = t + h >= target - 1e-16 * max(1.0, target)
        if hitting:
            h = target - t
        t_new = target if hitting else t + h

        k2 = rhs(t + 0.5 * h, y + (0.5 * h) * k1)
        k3 = rhs(t + 0.75 * h, y + (0.75 * h) * k2)
        y_new = y + h * (_B1 * k1 + _B2 * k2 + _B3 * k3)
        k4 = rhs(t_new, y_new)
        y_err = h * (_E1 * k1 + _E2 * k2 + _E3 * k3 + _E4 * k4)

        scale = atol + rtol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((np.abs(y_err) / scale) ** 2)))

        if err <= 1.0:
            accepted += 1
            t, y, k1 = t_new, y_new, k4
            drift = abs(float(np.sum(np.abs(y) ** 2)) - 1.0)
            if drift > max_drift:
                max_drift = drift
            if hitting:
                samples[sample_at] = y
                sample_at += 1
            if err > 0.0:
                factor = _SAFETY * err**-_ALPHA * err_prev**_BETA
            else:
                factor = _MAX_FACTOR
            err_prev = max(err, 1e-14)
            h = abs(h) * min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        else:
            rejected += 1
            h = abs(h) * min(1.0, max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / 3.0)))

    return samples, accepted, rejected, max_drift
