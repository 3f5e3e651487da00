"""Pure-numpy fallback for the compiled survival recursion."""
import numpy as np


def survival_series(U, psi_d, psi_in, n_max):
    """Return ``(F, S, amplitudes)`` for ``n = 1..n_max`` (``S`` includes ``S_0``)."""
    U = np.ascontiguousarray(U, dtype=np.complex128)
    psi_d = np.ascontiguousarray(psi_d, dtype=np.complex128)
    psi = np.array(psi_in, dtype=np.complex128)
    dim = U.shape[0]
    if U.shape[1] != dim or psi_d.shape[0] != dim or psi.shape[0] != dim:
        raise ValueError("dimension mismatch between propagator and states")

    F = np.zeros(n_max)
    S = np.empty(n_max + 1)
    amps = np.zeros(n_max, dtype=np.complex128)
    S[0] = np.vdot(psi, psi).real
    bra = psi_d.conj()
    for n in range(n_max):
        phi = U @ psi
        amp = bra @ phi
        amps[n] = amp
        F[n] = amp.real * amp.real + amp.imag * amp.imag
        psi = phi - amp * psi_d
        S[n + 1] = np.vdot(psi, psi).real
    return F, S, amps
