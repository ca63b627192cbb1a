"""Damped-wave to heat-equation convergence rates for semilinear SPDEs."""

__version__ = "0.1.0"

from .analysis import (ErrorCurve, FunctionalSpec, RateFit, fit_rate,
                       functional_eval, strong_error, weak_error)
from .config import ConfigError, ExperimentConfig, parse_config, parse_config_text
from .dynamics import (NonlinearitySpec, NumericalFailure, PathRecord,
                       simulate_coupled, step_heat, step_wave)
from .noise import (IncrementCovariance, NoiseSpectrum, joint_increment_cov,
                    make_spectrum, sample_increments, wave_increment_cov)
from .propagators import (BoundReport, ForcingWeights, ModeMatrix, apply_wave_semigroup,
                          forcing_weights, heat_factor, lemma_bound_ratio,
                          wave_mode_matrix)
from .spectral import (PhysicalField, SpectralBasis, SpectralVector, StateVector,
                       analyze, hs_norm, project, state_norm, synthesize)
