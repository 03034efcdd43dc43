"""Reduced density matrices of the atoms and of the field.

Two-atom basis order is row-major (atom 1, atom 2) over levels (1, 2, 3):
|11>, |12>, |13>, |21>, |22>, |23>, |31>, |32>, |33>. Density matrices are plain
complex ndarrays; functions accept a single matrix or a stack (..., d, d).
"""

from __future__ import annotations

import numpy as np

from .dynamics import DEGENERACY, WaveFunction
from .linalg import jacobi_eigh

# amplitude (0-based C index) multiplying each two-atom basis ket
COEFF_INDEX = np.array([0, 1, 2, 1, 4, 3, 2, 3, 5])

_HERMITIAN_TOL = 1e-10


def amplitude_gram(c: np.ndarray) -> np.ndarray:
    """rho_ij = sum_n C_i(n) C_j(n)^*, for amplitudes of shape (..., 6, L)."""
    return np.einsum("...in,...jn->...ij", c, np.conj(c))


def atoms_reduced(wf: WaveFunction) -> np.ndarray:
    """9x9 density matrix of the two atoms after tracing out the field."""
    return _atoms_from_gram(amplitude_gram(wf.c))


def _atoms_from_gram(gram: np.ndarray) -> np.ndarray:
    return gram[..., COEFF_INDEX[:, None], COEFF_INDEX[None, :]]


def atom1_reduced(rho9: np.ndarray) -> np.ndarray:
    """3x3 state of atom 1 (partial trace over atom 2)."""
    r = np.asarray(rho9).reshape(rho9.shape[:-2] + (3, 3, 3, 3))
    return np.einsum("...ijkj->...ik", r)


def atom2_reduced(rho9: np.ndarray) -> np.ndarray:
    """3x3 state of atom 2 (partial trace over atom 1)."""
    r = np.asarray(rho9).reshape(rho9.shape[:-2] + (3, 3, 3, 3))
    return np.einsum("...ijil->...jl", r)


def field_reduced(wf: WaveFunction) -> np.ndarray:
    """Field density matrix, dimension n_max + 5, in the Fock basis."""
    return _field_from_amplitudes(wf.c)


def _field_from_amplitudes(c: np.ndarray) -> np.ndarray:
    return np.einsum("i,...in,...im->...nm", DEGENERACY, c, np.conj(c))


def partial_transpose_second(rho9: np.ndarray) -> np.ndarray:
    """Transpose the atom-2 indices: out[(i,l),(k,j)] = in[(i,j),(k,l)]."""
    rho9 = np.asarray(rho9)
    r = rho9.reshape(rho9.shape[:-2] + (3, 3, 3, 3))
    return np.swapaxes(r, -3, -1).reshape(rho9.shape)


def hermitian_eigenvalues(m: np.ndarray) -> np.ndarray:
    """Ascending real eigenvalues of a Hermitian matrix (or a stack of them)."""
    m = np.asarray(m)
    if np.max(np.abs(m - np.conj(np.swapaxes(m, -1, -2))), initial=0.0) > _HERMITIAN_TOL:
        raise ValueError("matrix is not Hermitian within 1e-10")
    return jacobi_eigh(m)[0]
