"""Regularly varying time series in star-shaped metric spaces."""

from .errors import RVStarError
from .estimate import ThresholdRule, compare_spectral, empirical_spectral, extremogram, hill
from .models import (
    ModelSpec,
    ar1_positive,
    iid_pareto,
    max_moving_average,
    path_amplitude,
    simulate,
    true_extremogram,
    true_forward_spectral,
)
from .series import SeriesPath, ingest
from .spectral import (
    MCEstimate,
    SpectralLaw,
    WindowBatch,
    backward_expectation,
    nu_k_integral,
    spectral_moment,
    theta_backward_law,
    time_change_residual,
)
from .starspace import (
    Euclidean,
    PathSup,
    SnowflakeGauge,
    StarSpace,
    WeightedHilbert,
    gauge_modulus,
    polar_decompose,
    seq_metric,
    validate_axioms,
)
from .tailmeasure import build_tail_measure, polar_product_check, project, projection_consistency, tail_ratio_curve

__version__ = "0.1.0"
