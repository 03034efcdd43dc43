"""Two Xi-type three-level atoms in a single-mode cavity with intensity-dependent coupling."""

from .density import (
    atom1_reduced,
    atoms_reduced,
    field_reduced,
    hermitian_eigenvalues,
    partial_transpose_second,
)
from .dynamics import (
    SimulationConfig,
    WaveFunction,
    closed_form_amplitudes,
    evolve,
    initial_amplitudes,
    ode_evolve,
    propagate_resonance,
    propagate_resonance_grid,
    total_norm,
    truncation_cutoff,
)
from .nonlinearity import (
    CouplingBlock,
    NonlinearitySpec,
    coupling_strengths,
    laguerre_eval,
    nonlinearity_value,
)
from .observables import (
    ObservableRecord,
    linear_entropy,
    mandel_q,
    negativity,
    observable_record,
    observable_series,
    photon_moments,
    quadrature_params,
)
from .spectral import (
    BlockEigensystem,
    SpectralCoefficients,
    block_eigensystem,
    spectral_coefficients,
    symmetrized_block_matrix,
)

__version__ = "0.1.0"
