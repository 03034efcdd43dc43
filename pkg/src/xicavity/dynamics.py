"""State preparation and time evolution of the two-atom / one-mode system.

The amplitudes close into independent excitation blocks

    (C1(n), C2(n+1), C3(n+2), C4(n+3), C5(n+2), C6(n+4)),   n = 0 .. n_max,

so a state is stored as six arrays indexed by photon number and every solver
works block by block (vectorised over n).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln
from scipy.stats import poisson

from .integrate import dopri5
from .nonlinearity import CouplingBlock, NonlinearitySpec, coupling_strengths, coupling_table
from .spectral import SCALING, block_eigensystems, spectral_coefficients

# photon-number offset of each amplitude inside block n
BLOCK_OFFSETS = np.array([0, 1, 2, 3, 2, 4])
# multiplicity of the basis kets carried by C1..C6
DEGENERACY = np.array([1.0, 2.0, 2.0, 2.0, 1.0, 1.0])
PAD = 4

DEFAULT_ALPHA = math.sqrt(10.0)
DEFAULT_TAIL_EPSILON = 1e-12
DEFAULT_ODE_TOLERANCE = 1e-10


def default_grid(t_max: float = 25.0, steps: int = 1000) -> np.ndarray:
    return np.linspace(0.0, t_max, steps + 1)


@dataclass
class SimulationConfig:
    alpha: complex = DEFAULT_ALPHA
    spec: NonlinearitySpec = field(default_factory=NonlinearitySpec)
    delta1: float = 0.0
    delta2: float = 0.0
    t_grid: np.ndarray = field(default_factory=default_grid)
    tail_epsilon: float = DEFAULT_TAIL_EPSILON
    ode_tolerance: float = DEFAULT_ODE_TOLERANCE

    def __post_init__(self):
        self.t_grid = np.asarray(self.t_grid, dtype=float)
        if self.t_grid.ndim != 1 or self.t_grid.size == 0:
            raise ValueError("t_grid must be a non-empty 1-d sequence")
        if np.any(np.diff(self.t_grid) <= 0):
            raise ValueError("t_grid must be strictly increasing")
        if self.t_grid[0] < 0:
            raise ValueError("t_grid must start at t >= 0")
        if not 0 < self.tail_epsilon <= 1e-6:
            raise ValueError("tail_epsilon must lie in (0, 1e-6]")
        if not self.ode_tolerance > 0:
            raise ValueError("ode_tolerance must be positive")
        if abs(self.alpha) == 0:
            raise ValueError("coherent amplitude alpha must be nonzero")

    @property
    def resonant(self) -> bool:
        return self.delta1 == 0 and self.delta2 == 0


@dataclass
class WaveFunction:
    """Amplitudes C1..C6 at scaled time ``t``; ``c[i - 1][n]`` is C_i(n, t)."""

    t: float
    c: np.ndarray  # complex, shape (6, n_max + 5)

    @property
    def n_max(self) -> int:
        return self.c.shape[1] - PAD - 1

    def blocks(self) -> np.ndarray:
        """Block vectors, shape (n_max + 1, 6)."""
        n = np.arange(self.n_max + 1)
        return self.c[np.arange(6)[None, :], n[:, None] + BLOCK_OFFSETS[None, :]]

    @classmethod
    def from_blocks(cls, t: float, blocks: np.ndarray) -> "WaveFunction":
        nb = blocks.shape[0]
        c = np.zeros((6, nb + PAD), dtype=complex)
        n = np.arange(nb)
        c[np.arange(6)[None, :], n[:, None] + BLOCK_OFFSETS[None, :]] = blocks
        return cls(float(t), c)


def truncation_cutoff(alpha: complex, tail_epsilon: float) -> int:
    """Smallest N whose Poisson tail P(n > N) for mean |alpha|^2 is below ``tail_epsilon``."""
    mean = abs(alpha) ** 2
    if mean <= 0:
        raise ValueError("truncation_cutoff needs |alpha|^2 > 0")
    n = int(mean)
    # walk down first, in case the mode already satisfies the bound
    while n > 0 and poisson.sf(n - 1, mean) < tail_epsilon:
        n -= 1
    while poisson.sf(n, mean) >= tail_epsilon:
        n += 1
    return n


def initial_amplitudes(alpha: complex, n_max: int) -> WaveFunction:
    """Atoms in |1,1>, field in the coherent state |alpha>.

    Only blocks 0..n_max are carried, so C1 is populated up to n_max; the four
    padding slots exist for the ladder shifts of the other amplitudes.
    """
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    n = np.arange(n_max + 1)
    r = abs(alpha)
    log_mag = -0.5 * r * r + n * math.log(r) - 0.5 * gammaln(n + 1)
    c = np.zeros((6, n_max + 1 + PAD), dtype=complex)
    c[0, : n_max + 1] = np.exp(log_mag + 1j * n * np.angle(alpha))
    return WaveFunction(0.0, c)


def total_norm(wf: WaveFunction) -> float:
    return float(np.sum(DEGENERACY[:, None] * np.abs(wf.c) ** 2))


def _eigensystem_arrays(spec: NonlinearitySpec, n_max: int):
    systems = block_eigensystems(coupling_table(spec, n_max))
    lam = np.stack([s.frequencies for s in systems])
    q = np.stack([s.modes for s in systems])
    return lam, q


def propagate_resonance_grid(wf0: WaveFunction, spec: NonlinearitySpec, times) -> list[WaveFunction]:
    """Exact resonant evolution ``S^-1 Q exp(-i Lambda t) Q^T S`` applied block-wise
    at every requested time (times are measured from ``wf0.t``)."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    lam, q = _eigensystem_arrays(spec, wf0.n_max)
    z = wf0.blocks() * SCALING[None, :]
    modal = np.einsum("nji,nj->ni", q, z)
    phase = np.exp(-1j * lam[None, :, :] * times[:, None, None])
    blocks = np.einsum("nij,tnj->tni", q, phase * modal[None]) / SCALING
    return [WaveFunction.from_blocks(wf0.t + t, b) for t, b in zip(times, blocks)]


def propagate_resonance(wf0: WaveFunction, spec: NonlinearitySpec, t: float) -> WaveFunction:
    return propagate_resonance_grid(wf0, spec, [t])[0]


# detuning exponent of each coupling: entry (i, j) of the matrix multiplies
# exp(i * (k1 * delta1 + k2 * delta2) * t) with (k1, k2) = _PHASE_DELTA1/2[i, j]
_PHASE_DELTA1 = np.zeros((6, 6))
_PHASE_DELTA2 = np.zeros((6, 6))
for (_i, _j), (_k1, _k2) in {
    (0, 1): (1, 0), (1, 0): (-1, 0),
    (1, 2): (0, 1), (2, 1): (0, -1),
    (1, 4): (1, 0), (4, 1): (-1, 0),
    (2, 3): (1, 0), (3, 2): (-1, 0),
    (3, 4): (0, -1), (4, 3): (0, 1),
    (3, 5): (0, 1), (5, 3): (0, -1),
}.items():
    _PHASE_DELTA1[_i, _j] = _k1
    _PHASE_DELTA2[_i, _j] = _k2


def _raw_matrices(v: np.ndarray) -> np.ndarray:
    """Resonance matrices M (dC/dt = -i M C) for a coupling table of shape (nb, 4)."""
    v1, v2, v3, v4 = v.T
    m = np.zeros((v.shape[0], 6, 6))
    m[:, 0, 1] = 2 * v1
    m[:, 1, 0] = v1
    m[:, 1, 2] = v2
    m[:, 1, 4] = v2
    m[:, 2, 1] = v2
    m[:, 2, 3] = v3
    m[:, 3, 2] = v3
    m[:, 3, 4] = v3
    m[:, 3, 5] = v4
    m[:, 4, 1] = 2 * v2
    m[:, 4, 3] = 2 * v3
    m[:, 5, 3] = 2 * v4
    return m


def _rhs_factory(v: np.ndarray, delta1: float, delta2: float):
    gen = -1j * _raw_matrices(v)
    freq = delta1 * _PHASE_DELTA1 + delta2 * _PHASE_DELTA2
    if not np.any(freq):
        return lambda t, y: np.matmul(gen, y[..., None])[..., 0]

    def rhs(t, y):
        return np.matmul(gen * np.exp(1j * freq * t), y[..., None])[..., 0]

    return rhs


def ode_block_evolve(v, y0, delta1: float, delta2: float, t_grid, rtol: float, atol: float | None = None, t0: float = 0.0):
    """Integrate the six coupled amplitude equations for a stack of blocks.

    ``v`` has shape (nblocks, 4), ``y0`` shape (nblocks, 6); returns
    (len(t_grid), nblocks, 6).
    """
    v = np.atleast_2d(np.asarray(v, dtype=float))
    y0 = np.atleast_2d(np.asarray(y0, dtype=complex))
    return dopri5(_rhs_factory(v, delta1, delta2), t0, y0, t_grid, rtol=rtol, atol=atol)


def ode_evolve(
    wf0: WaveFunction,
    spec: NonlinearitySpec,
    delta1: float,
    delta2: float,
    t_grid,
    ode_tolerance: float = DEFAULT_ODE_TOLERANCE,
) -> list[WaveFunction]:
    """Reference solution by adaptive RK integration; valid for any detuning."""
    t_grid = np.asarray(t_grid, dtype=float)
    v = coupling_table(spec, wf0.n_max)
    ys = ode_block_evolve(v, wf0.blocks(), delta1, delta2, t_grid, ode_tolerance, t0=wf0.t)
    return [WaveFunction.from_blocks(t, y) for t, y in zip(t_grid, ys)]


def closed_form_amplitudes(
    n: int,
    spec: NonlinearitySpec,
    t,
    variant: str = "corrected",
    c1_0: complex = 1.0,
) -> np.ndarray:
    """Resonant closed-form block amplitudes (C1(n), C2(n+1), ..., C6(n+4)).

    ``variant="printed"`` evaluates the formulas exactly as published, which
    carry three errors: a 6 V3^2 term in x3, a C2 that does not scale with V1n,
    and the wrong sign on C4. ``variant="corrected"`` fixes all three.
    ``t`` may be an array; the result then has shape (6,) + t.shape.
    """
    if variant not in ("printed", "corrected"):
        raise ValueError(f"variant must be 'printed' or 'corrected', got {variant!r}")
    block = coupling_strengths(spec, n)
    return _closed_form(block, np.asarray(t, dtype=float), variant == "printed") * c1_0


def _closed_form(block: CouplingBlock, t: np.ndarray, printed: bool) -> np.ndarray:
    v1, v2, v3, v4 = block.v
    sc = spectral_coefficients(block, printed_x3=printed)
    x1, x2, x4, x5, eta = sc.x1, sc.x2, sc.x4, sc.x5, sc.eta
    b1, b2 = sc.beta1, sc.beta2
    cos1, cos2 = np.cos(b1 * t), np.cos(b2 * t)
    sin1, sin2 = np.sin(b1 * t), np.sin(b2 * t)

    c1 = ((x2 - x4) * eta + (2 * v1**2 * x2 - b2**2 * x4) * cos1 - (2 * v1**2 * x2 - b1**2 * x4) * cos2) / (x2 * eta)
    if printed:
        c2 = 1j / (2 * b1 * b2 * eta) * ((x4 - 2 * b1**2) * b2 * sin1 - (x4 - 2 * b2**2) * b1 * sin2)
    else:
        a = 2 * v1**2 + 3 * v2**2
        c2 = (-1j * v1 / eta) * ((a - b2**2) * sin1 / b1 - (a - b1**2) * sin2 / b2)
    c3 = (-x5 * eta - (b2**2 * x5 - v1 * v2 * x2) * cos1 + (b1**2 * x5 - v1 * v2 * x2) * cos2) / (x2 * eta)
    sign = 1j if printed else -1j
    c4 = sign * x1 / (2 * v4 * eta) * (sin1 / b1 - sin2 / b2)
    c5 = 2 * c3
    c6 = x1 / (x2 * eta) * (eta - b1**2 * cos2 + b2**2 * cos1)
    return np.array([c1, c2 * np.ones_like(t), c3, c4, c5, c6], dtype=complex)


def closed_form_grid(wf0: WaveFunction, spec: NonlinearitySpec, times, variant: str = "corrected") -> list[WaveFunction]:
    """Closed-form evolution of an initial state with only C1 populated."""
    times = np.atleast_1d(np.asarray(times, dtype=float))
    c10 = wf0.blocks()[:, 0]
    blocks = np.empty((times.size, c10.size, 6), dtype=complex)
    for n, amp in enumerate(c10):
        blocks[:, n, :] = closed_form_amplitudes(n, spec, times, variant, amp).T
    return [WaveFunction.from_blocks(wf0.t + t, b) for t, b in zip(times, blocks)]


def evolve(config: SimulationConfig, solver: str = "eigen") -> list[WaveFunction]:
    """Run a configuration on its time grid with the chosen solver."""
    n_max = truncation_cutoff(config.alpha, config.tail_epsilon)
    wf0 = initial_amplitudes(config.alpha, n_max)
    if solver == "eigen":
        if not config.resonant:
            raise ValueError("the eigen solver only handles resonance (delta1 = delta2 = 0)")
        return propagate_resonance_grid(wf0, config.spec, config.t_grid)
    if solver == "ode":
        return ode_evolve(wf0, config.spec, config.delta1, config.delta2, config.t_grid, config.ode_tolerance)
    raise ValueError(f"unknown solver {solver!r}")
