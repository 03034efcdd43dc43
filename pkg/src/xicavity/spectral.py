"""Per-block spectral data of the resonant six-amplitude coupling matrix.

At resonance each excitation block evolves under a constant 6x6 matrix whose
spectrum is {-beta1, -beta2, 0, 0, beta2, beta1}, with beta1^2 and beta2^2 the
roots of lambda^2 - x3*lambda + x2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ComplexSpectrum
from .linalg import jacobi_eigh
from .nonlinearity import CouplingBlock

SQRT2 = math.sqrt(2.0)

# S = diag(sqrt of the degeneracy weights 1,2,2,2,1,1); S M S^-1 is symmetric.
SCALING = np.array([1.0, SQRT2, SQRT2, SQRT2, 1.0, 1.0])

_DISCRIMINANT_TOL = 1e-12


@dataclass(frozen=True)
class SpectralCoefficients:
    n: int
    x1: float
    x2: float
    x3: float
    x4: float
    x5: float
    eta: float
    beta1: float
    beta2: float


@dataclass(frozen=True)
class BlockEigensystem:
    frequencies: np.ndarray  # (6,), ascending
    modes: np.ndarray  # (6, 6), orthonormal columns
    scaling: np.ndarray  # (6,)


def x3_printed(block: CouplingBlock) -> float:
    """The V3 coefficient as it appears in the published closed form (6 instead of 3)."""
    v1, v2, v3, v4 = block.v
    return 2 * (v1**2 + v4**2) + 3 * (v2**2 + 2 * v3**2)


def spectral_coefficients(block: CouplingBlock, *, printed_x3: bool = False) -> SpectralCoefficients:
    """x1..x5, eta, beta1, beta2 of one block.

    ``printed_x3=True`` substitutes the published x3 (used only for errata
    diagnostics); the default is the value consistent with the equations of
    motion, x3 = trace(M_s^2) / 2.
    """
    v1, v2, v3, v4 = block.v
    x1 = 6 * v1 * v2 * v3 * v4
    x2 = 6 * v1**2 * v3**2 + 4 * v1**2 * v4**2 + 6 * v2**2 * v4**2
    x4 = 6 * v1**2 * v3**2 + 4 * v1**2 * v4**2
    x5 = 2 * v1 * v2 * v4**2
    x3 = x3_printed(block) if printed_x3 else 2 * (v1**2 + v4**2) + 3 * (v2**2 + v3**2)
    disc = x3 * x3 - 4 * x2
    if disc < -_DISCRIMINANT_TOL:
        raise ComplexSpectrum(f"complex spectrum in block n={block.n}: x3^2 - 4 x2 = {disc:.3e}")
    eta = math.sqrt(max(disc, 0.0))
    beta1 = math.sqrt((x3 + eta) / 2)
    beta2 = math.sqrt(max((x3 - eta) / 2, 0.0))
    return SpectralCoefficients(block.n, x1, x2, x3, x4, x5, eta, beta1, beta2)


def symmetrized_block_matrix(block: CouplingBlock) -> np.ndarray:
    """Resonance coupling matrix of (C1(n), C2(n+1), C3(n+2), C4(n+3), C5(n+2), C6(n+4)),
    conjugated by ``SCALING`` so that it is real symmetric."""
    return _symmetrized(np.asarray(block.v, dtype=float)[None, :])[0]


def _symmetrized(v: np.ndarray) -> np.ndarray:
    v1, v2, v3, v4 = v.T
    m = np.zeros((v.shape[0], 6, 6))
    for (i, j), val in (
        ((0, 1), SQRT2 * v1),
        ((1, 2), v2),
        ((1, 4), SQRT2 * v2),
        ((2, 3), v3),
        ((3, 4), SQRT2 * v3),
        ((3, 5), SQRT2 * v4),
    ):
        m[:, i, j] = val
        m[:, j, i] = val
    return m


def raw_block_matrix(block: CouplingBlock) -> np.ndarray:
    """Unsymmetrized resonance matrix M with dC/dt = -i M C."""
    return symmetrized_block_matrix(block) * SCALING[None, :] / SCALING[:, None]


def block_eigensystem(block: CouplingBlock) -> BlockEigensystem:
    return block_eigensystems(np.asarray(block.v, dtype=float)[None, :])[0]


def block_eigensystems(v: np.ndarray) -> list[BlockEigensystem]:
    """Eigensystems for a table of couplings, shape (nblocks, 4), solved as one batch."""
    w, q = jacobi_eigh(_symmetrized(np.atleast_2d(v)))
    return [BlockEigensystem(w[i], q[i], SCALING.copy()) for i in range(w.shape[0])]
