"""Entanglement and nonclassicality observables of an evolved state."""

from __future__ import annotations

from dataclasses import astuple, dataclass, fields

import numpy as np

from .density import (
    _atoms_from_gram,
    _field_from_amplitudes,
    amplitude_gram,
    atom1_reduced,
    hermitian_eigenvalues,
    partial_transpose_second,
)
from .dynamics import DEGENERACY, WaveFunction
from .errors import VacuumField

NEGATIVE_EIGENVALUE_THRESHOLD = -1e-10
VACUUM_THRESHOLD = 1e-12

CSV_HEADER = ("gt", "S_atoms", "S_atom1", "negativity", "mandel_Q", "mean_n", "S_x", "S_y")


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    s_atoms: float
    s_atom1: float
    negativity: float
    mandel_q: float
    mean_n: float
    s_x: float
    s_y: float

    def as_row(self) -> tuple[float, ...]:
        return astuple(self)


RECORD_FIELDS = tuple(f.name for f in fields(ObservableRecord))


def linear_entropy(rho: np.ndarray) -> float | np.ndarray:
    """1 - Tr(rho^2), using Tr(rho^2) = sum |rho_rs|^2 for Hermitian rho."""
    return 1.0 - np.sum(np.abs(rho) ** 2, axis=(-2, -1))


def negativity(rho9: np.ndarray) -> float | np.ndarray:
    """Sum of |negative eigenvalues| of the partial transpose over atom 2."""
    mu = hermitian_eigenvalues(partial_transpose_second(rho9))
    return 0.0 - np.sum(np.where(mu < NEGATIVE_EIGENVALUE_THRESHOLD, mu, 0.0), axis=-1)


def _photon_distribution(c: np.ndarray) -> np.ndarray:
    return np.einsum("i,...in->...n", DEGENERACY, np.abs(c) ** 2)


def photon_moments(wf: WaveFunction) -> tuple[float, float]:
    p = _photon_distribution(wf.c)
    n = np.arange(p.shape[-1])
    return float(p @ n), float(p @ n**2)


def _mandel(mean_n, mean_n2):
    if np.any(np.asarray(mean_n) <= VACUUM_THRESHOLD):
        raise VacuumField("vacuum field: Mandel Q is undefined for <n> <= 1e-12")
    return (mean_n2 - mean_n**2) / mean_n - 1.0


def mandel_q(wf: WaveFunction) -> float:
    return float(_mandel(*photon_moments(wf)))


def _quadratures(rho_f: np.ndarray):
    dim = rho_f.shape[-1]
    n = np.arange(dim)
    mean_n = np.real(np.einsum("...nn->...n", rho_f)) @ n
    a1 = np.sum(np.sqrt(n[1:]) * np.diagonal(rho_f, offset=-1, axis1=-2, axis2=-1), axis=-1)
    a2 = np.sum(np.sqrt(n[2:] * (n[2:] - 1)) * np.diagonal(rho_f, offset=-2, axis1=-2, axis2=-1), axis=-1)
    s_x = 2 * a2.real + 2 * mean_n - 4 * a1.real**2
    s_y = -2 * a2.real + 2 * mean_n - 4 * a1.imag**2
    return s_x, s_y


def quadrature_params(wf: WaveFunction) -> tuple[float, float]:
    """(S_x, S_y) = (4 Var x - 1, 4 Var y - 1) for x = (a + a^+)/2, y = (a - a^+)/2i."""
    s_x, s_y = _quadratures(_field_from_amplitudes(wf.c))
    return float(s_x), float(s_y)


def observable_record(wf: WaveFunction) -> ObservableRecord:
    return observable_series([wf])[0]


def observable_series(wfs: list[WaveFunction]) -> list[ObservableRecord]:
    """Records for a whole trajectory; the matrix work is batched over time."""
    c = np.stack([wf.c for wf in wfs])
    rho9 = _atoms_from_gram(amplitude_gram(c))
    s_atoms = linear_entropy(rho9)
    s_atom1 = linear_entropy(atom1_reduced(rho9))
    neg = negativity(rho9)
    p = _photon_distribution(c)
    n = np.arange(p.shape[-1])
    mean_n = p @ n
    q = _mandel(mean_n, p @ n**2)
    s_x, s_y = _quadratures(_field_from_amplitudes(c))
    return [
        ObservableRecord(*(float(x) for x in row))
        for row in zip([wf.t for wf in wfs], s_atoms, s_atom1, neg, q, mean_n, s_x, s_y)
    ]
