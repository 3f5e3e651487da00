# cython: language_level=3
"""Compiled survival recursion.

Dense, small-dimension systems spend almost all their time in per-step
Python overhead when driven from numpy, so the whole loop lives here.
"""
import numpy as np

cimport numpy as cnp

cnp.import_array()


def survival_series(const double complex[:, ::1] U,
                    const double complex[::1] psi_d,
                    const double complex[::1] psi_in,
                    Py_ssize_t n_max):
    """Return ``(F, S, amplitudes)`` for ``n = 1..n_max`` (``S`` includes ``S_0``)."""
    cdef Py_ssize_t dim = U.shape[0]
    cdef Py_ssize_t n, i, j
    cdef double complex acc, amp
    cdef double s

    if U.shape[1] != dim or psi_d.shape[0] != dim or psi_in.shape[0] != dim:
        raise ValueError("dimension mismatch between propagator and states")

    F_arr = np.zeros(n_max, dtype=np.float64)
    S_arr = np.empty(n_max + 1, dtype=np.float64)
    amp_arr = np.zeros(n_max, dtype=np.complex128)
    cdef double[::1] F = F_arr
    cdef double[::1] S = S_arr
    cdef double complex[::1] amps = amp_arr
    cdef double complex[::1] psi = np.array(psi_in, dtype=np.complex128)
    cdef double complex[::1] phi = np.empty(dim, dtype=np.complex128)

    s = 0.0
    for i in range(dim):
        s += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
    S[0] = s

    with nogil:
        for n in range(n_max):
            for i in range(dim):
                acc = 0.0
                for j in range(dim):
                    acc = acc + U[i, j] * psi[j]
                phi[i] = acc
            amp = 0.0
            for i in range(dim):
                amp = amp + psi_d[i].conjugate() * phi[i]
            amps[n] = amp
            F[n] = amp.real * amp.real + amp.imag * amp.imag
            s = 0.0
            for i in range(dim):
                psi[i] = phi[i] - amp * psi_d[i]
                s += psi[i].real * psi[i].real + psi[i].imag * psi[i].imag
            S[n + 1] = s

    return F_arr, S_arr, amp_arr
