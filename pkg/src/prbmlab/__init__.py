"""Random open quantum systems with power-law banded couplings.

Sampling of power-law random banded operators, Lindbladian spectral gaps
(dense and matrix-free), effective classical rate equations in both
decoherence limits, mode diagnostics, relaxation dynamics, and a seeded
sweep harness with a command line interface.
"""

from .ensembles import (EnsembleSpec, RandomOperator, SpectralDecomposition,
                        form_factor, form_factor_matrix, normalization_constant,
                        sample_operator, sample_diagonal_operator, spectrum,
                        ipr, vector_iprs, count_localized, extreme_value_mean,
                        OPEN, PERIODIC)
from .lindblad import (LindbladModel, SuperoperatorSpectrum, ConvergenceError,
                       apply_superoperator, build_dense_superoperator,
                       build_real_superoperator, full_spectrum, leading_modes,
                       pairing_defect, coords_from_hermitian, matrix_from_coords)
from .rate_matrices import (RateMatrix, weak_rate_matrix, strong_rate_matrix,
                            localized_limit_a0, mean_field_a0,
                            circulant_mean_field_eigs, asymptotic_gap,
                            chebyshev_modes, tail_gap_estimate,
                            multi_channel_rate_matrix, rate_gap,
                            validate_rate_matrix)
from .diagnostics import (population_overlap, ipr_population, ipr_real_space,
                          population_dos, classify_phase, PhaseFit)
from .dynamics import (Trajectory, RelaxationFit, RelaxationReport,
                       RelaxedSiteError, initial_state_hole, evolve,
                       fit_relaxation, relaxation_report, DEFAULT_WINDOWS)

__version__ = "0.1.0"
