# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled propagation kernel.

Same algorithm as trapsim._kernel_py (embedded Bogacki-Shampine 3(2) pair,
PI step control, first-same-as-last, exact sample hitting) with the inner
loops in C.  See that module for the Hamiltonian conventions; the two
backends are interchangeable and trapsim.backend picks whichever is present.
"""

import numpy as np

from libc.math cimport cos, sin, sqrt, fabs, pow

from .errors import IntegrationError

cdef double _B1 = 2.0 / 9.0
cdef double _B2 = 1.0 / 3.0
cdef double _B3 = 4.0 / 9.0
cdef double _E1 = -5.0 / 72.0
cdef double _E2 = 1.0 / 12.0
cdef double _E3 = 1.0 / 9.0
cdef double _E4 = -1.0 / 8.0

cdef double _SAFETY = 0.9
cdef double _MIN_FACTOR = 0.2
cdef double _MAX_FACTOR = 5.0
cdef double _ALPHA = 0.7 / 3.0
cdef double _BETA = 0.4 / 3.0


cdef void _rhs(double t,
               double complex[::1] y,
               double complex[::1] out,
               double[::1] d0,
               double[:, ::1] qmat,
               double[::1] omegas,
               double mu,
               double by,
               long[::1] masks,
               double[::1] diag_buffer) noexcept:
    """out <- -i H(t) y for the diagonal-plus-spin-flip Hamiltonian."""
    cdef Py_ssize_t dim = y.shape[0]
    cdef Py_ssize_t n_modes = qmat.shape[0]
    cdef Py_ssize_t n_masks = masks.shape[0]
    cdef Py_ssize_t s, m, k
    cdef long mask
    cdef double br
    cdef double complex amp

    for s in range(dim):
        diag_buffer[s] = d0[s]
    for m in range(n_modes):
        br = -omegas[m] * cos(2.0 * mu * t) \
             - 2.0 * mu * sin(omegas[m] * t) * sin(mu * t)
        for s in range(dim):
            diag_buffer[s] += br * qmat[m, s]
    for s in range(dim):
        out[s] = -1j * (diag_buffer[s] * y[s])
    for k in range(n_masks):
        mask = masks[k]
        for s in range(dim):
            amp = y[s ^ mask]
            out[s] = out[s] + 1j * (by * amp)


def propagate(psi0, d0, qmat, omegas, double mu, double by, flip_masks,
              sample_times, double rtol, double atol):
    """Propagate psi0; returns (samples, accepted, rejected, max_drift).

    Argument and return conventions match trapsim._kernel_py.propagate.
    """
    cdef double complex[::1] y = np.array(psi0, dtype=np.complex128)
    cdef double[::1] d0_v = np.ascontiguousarray(d0, dtype=np.float64)
    cdef double[:, ::1] qmat_v = np.ascontiguousarray(
        np.asarray(qmat, dtype=np.float64).reshape(len(qmat), -1)
        if len(qmat) else np.zeros((0, len(psi0)))
    )
    cdef double[::1] omegas_v = np.ascontiguousarray(omegas, dtype=np.float64)
    cdef long[::1] masks_v = np.ascontiguousarray(flip_masks, dtype=np.int64)
    cdef double[::1] times_v = np.ascontiguousarray(sample_times, dtype=np.float64)

    cdef Py_ssize_t dim = y.shape[0]
    cdef Py_ssize_t n_samples = times_v.shape[0]
    cdef Py_ssize_t n_modes = qmat_v.shape[0]
    cdef double duration = times_v[n_samples - 1]

    samples_arr = np.empty((n_samples, dim), dtype=np.complex128)
    cdef double complex[:, ::1] samples = samples_arr

    work = [np.empty(dim, dtype=np.complex128) for _ in range(6)]
    cdef double complex[::1] k1 = work[0]
    cdef double complex[::1] k2 = work[1]
    cdef double complex[::1] k3 = work[2]
    cdef double complex[::1] k4 = work[3]
    cdef double complex[::1] y_new = work[4]
    cdef double complex[::1] y_stage = work[5]
    cdef double[::1] diag_buffer = np.empty(dim, dtype=np.float64)

    cdef double fastest = 1.0 / duration
    cdef Py_ssize_t s
    for s in range(dim):
        if fabs(d0_v[s]) > fastest:
            fastest = fabs(d0_v[s])
    if fabs(by) > fastest:
        fastest = fabs(by)
    if n_modes > 0 and 2.0 * mu > fastest:
        fastest = 2.0 * mu
    cdef double h = duration / 10.0
    if 0.05 / fastest < h:
        h = 0.05 / fastest

    cdef double t = 0.0
    cdef double t_new, target, err, scale, drift, norm, factor, abs_y, abs_new
    cdef double err_prev = 1.0
    cdef double max_drift = 0.0
    cdef long accepted = 0
    cdef long rejected = 0
    cdef Py_ssize_t sample_at = 0
    cdef bint hitting
    cdef double complex[::1] swap

    _rhs(t, y, k1, d0_v, qmat_v, omegas_v, mu, by, masks_v, diag_buffer)

    while sample_at < n_samples:
        target = times_v[sample_at]
        if target - t <= 1e-18 * (1.0 if target < 1.0 else target):
            for s in range(dim):
                samples[sample_at, s] = y[s]
            sample_at += 1
            continue
        if h < 1e-16 * duration:
            raise IntegrationError(
                f"step size underflow at t = {t:.6e} s (h = {h:.3e} s); "
                f"tolerances rtol={rtol:.1e}, atol={atol:.1e} may be too tight"
            )
        hitting = t + h >= target - 1e-16 * (1.0 if target < 1.0 else target)
        if hitting:
            h = target - t
        t_new = target if hitting else t + h

        for s in range(dim):
            y_stage[s] = y[s] + (0.5 * h) * k1[s]
        _rhs(t + 0.5 * h, y_stage, k2, d0_v, qmat_v, omegas_v, mu, by, masks_v,
             diag_buffer)
        for s in range(dim):
            y_stage[s] = y[s] + (0.75 * h) * k2[s]
        _rhs(t + 0.75 * h, y_stage, k3, d0_v, qmat_v, omegas_v, mu, by, masks_v,
             diag_buffer)
        for s in range(dim):
            y_new[s] = y[s] + h * (_B1 * k1[s] + _B2 * k2[s] + _B3 * k3[s])
        _rhs(t_new, y_new, k4, d0_v, qmat_v, omegas_v, mu, by, masks_v,
             diag_buffer)

        err = 0.0
        for s in range(dim):
            abs_y = abs(y[s])
            abs_new = abs(y_new[s])
            scale = atol + rtol * (abs_y if abs_y > abs_new else abs_new)
            abs_new = abs(h * (_E1 * k1[s] + _E2 * k2[s] + _E3 * k3[s]
                               + _E4 * k4[s])) / scale
            err += abs_new * abs_new
        err = sqrt(err / dim)

        if err <= 1.0:
            accepted += 1
            t = t_new
            swap = y
            y = y_new
            y_new = swap
            swap = k1
            k1 = k4
            k4 = swap
            norm = 0.0
            for s in range(dim):
                norm += y[s].real * y[s].real + y[s].imag * y[s].imag
            drift = fabs(norm - 1.0)
            if drift > max_drift:
                max_drift = drift
            if hitting:
                for s in range(dim):
                    samples[sample_at, s] = y[s]
                sample_at += 1
            if err > 0.0:
                factor = _SAFETY * pow(err, -_ALPHA) * pow(err_prev, _BETA)
            else:
                factor = _MAX_FACTOR
            err_prev = err if err > 1e-14 else 1e-14
            if factor > _MAX_FACTOR:
                factor = _MAX_FACTOR
            if factor < _MIN_FACTOR:
                factor = _MIN_FACTOR
            h = fabs(h) * factor
        else:
            rejected += 1
            factor = _SAFETY * pow(err, -1.0 / 3.0)
            if factor > 1.0:
                factor = 1.0
            if factor < _MIN_FACTOR:
                factor = _MIN_FACTOR
            h = fabs(h) * factor

    return samples_arr, int(accepted), int(rejected), max_drift
