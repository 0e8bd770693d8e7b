import numpy as np

import sdm


def spectral_hamiltonian(grid: sdm.Grid, model) -> np.ndarray:
    """Dense H = F^-1 diag(k^2/2) F + V, the exact operator the split-step
    propagator exponentiates; oracle for stepper tests."""
    n = grid.n
    F = np.fft.fft(np.eye(n), axis=0)
    Finv = np.fft.ifft(np.eye(n), axis=0)
    return Finv @ np.diag(0.5 * grid.k**2) @ F + np.diag(model.potential(grid.x))
