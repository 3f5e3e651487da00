"""First-detection statistics of stroboscopically measured quantum walks."""
from .detection import (
    DetectionSeries,
    DetectionSetup,
    SpectralMeasure,
    SubspaceBases,
    SurvivalSpectrum,
    bright_dark_bases,
    decay_rate_check,
    generating_function,
    pdet_aleksandrov,
    pdet_contour,
    pdet_projection,
    pdet_spectral,
    series_coefficients,
    simulate,
    spectral_measure,
    survival_operator,
    survival_spectrum,
    verify_pole_duality,
)
from .graphs import GraphSpec, build, load_adjacency, localized_state
from .kernels import BACKEND
from .spectral import (
    HermitianMatrix,
    NotHermitianError,
    QuasienergySectors,
    SpectralData,
    build_sectors,
    detect_resonances,
    diagonalize,
    propagator,
)

__version__ = "0.1.0"
