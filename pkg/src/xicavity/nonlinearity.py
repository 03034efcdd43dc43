"""Intensity functions f(n) and the ladder couplings they induce."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import NonlinearitySingularity

KINDS = ("constant", "harmonious", "trapped_ion")

DEFAULT_LAMB_DICKE = 0.2

_SINGULAR_TOL = 1e-12


@dataclass(frozen=True)
class NonlinearitySpec:
    """Which deformation function multiplies the atom-field coupling.

    ``lamb_dicke`` is only meaningful (and required) for ``kind="trapped_ion"``.
    """

    kind: str = "constant"
    lamb_dicke: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown nonlinearity kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "trapped_ion":
            if self.lamb_dicke is None or not self.lamb_dicke > 0 or not math.isfinite(self.lamb_dicke):
                raise ValueError("trapped_ion nonlinearity needs a finite lamb_dicke > 0")
        elif self.lamb_dicke is not None:
            raise ValueError(f"lamb_dicke is only accepted for trapped_ion, not {self.kind}")

    @classmethod
    def from_name(cls, name: str, eta: float = DEFAULT_LAMB_DICKE) -> "NonlinearitySpec":
        kind = name.replace("-", "_")
        if kind == "trapped_ion":
            return cls(kind, float(eta))
        return cls(kind)

    @property
    def label(self) -> str:
        if self.kind == "trapped_ion":
            return f"trapped_ion(eta={self.lamb_dicke:g})"
        return self.kind


@dataclass(frozen=True)
class CouplingBlock:
    """Couplings V_1n..V_4n of one excitation block, in units of g."""

    n: int
    v: tuple[float, float, float, float]


def laguerre_eval(n: int, m: int, x: float) -> float:
    """Associated Laguerre polynomial L_n^m(x) by upward three-term recurrence."""
    if n < 0 or m < 0:
        raise ValueError("laguerre_eval needs n >= 0 and m >= 0")
    prev = 1.0
    if n == 0:
        return prev
    cur = 1.0 + m - x
    for k in range(1, n):
        prev, cur = cur, ((2 * k + 1 + m - x) * cur - (k + m) * prev) / (k + 1)
    return cur


def nonlinearity_value(spec: NonlinearitySpec, m: int) -> float:
    """f(m) for m >= 1. f(0) never enters the couplings, so it is left undefined."""
    if m < 1:
        raise ValueError(f"nonlinearity is only evaluated at m >= 1, got {m}")
    if spec.kind == "constant":
        return 1.0
    if spec.kind == "harmonious":
        return 1.0 / math.sqrt(m)
    x = spec.lamb_dicke**2
    denom = (m + 1) * laguerre_eval(m, 0, x)
    if abs(denom) < _SINGULAR_TOL:
        raise NonlinearitySingularity(
            f"nonlinearity singularity: (m+1) L_m^0(eta^2) vanishes at m={m}, eta={spec.lamb_dicke}"
        )
    return laguerre_eval(m, 1, x) / denom


def coupling_strengths(spec: NonlinearitySpec, n: int) -> CouplingBlock:
    if n < 0:
        raise ValueError(f"photon index must be >= 0, got {n}")
    if spec.kind == "harmonious":
        # f(m) sqrt(m) == 1 identically; avoid the rounding of 1/sqrt(m)*sqrt(m)
        return CouplingBlock(n, (1.0, 1.0, 1.0, 1.0))
    v = tuple(nonlinearity_value(spec, n + j) * math.sqrt(n + j) for j in range(1, 5))
    return CouplingBlock(n, v)


def coupling_table(spec: NonlinearitySpec, n_max: int) -> np.ndarray:
    """Array of shape (n_max + 1, 4) whose row n holds V_1n..V_4n."""
    return np.array([coupling_strengths(spec, n).v for n in range(n_max + 1)], dtype=float)
