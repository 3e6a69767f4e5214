"""Bayesian model comparison for periodic signals in unevenly sampled data.

The model is a sum of sinusoids plus a low-order polynomial with Gaussian
noise whose variance is the reported uncertainty plus an unknown jitter.
Linear coefficients are integrated out with the Laplace approximation, the
jitter by quadrature, and frequencies by scanning a regular grid.
"""
__version__ = "0.1.0"

from .analysis import Analysis, ScanSettings, analyze
from .compare import (
    BinnedDensity,
    ModelPosterior,
    amplitude_phase,
    assemble_posterior,
    delta_posterior,
    frequency_marginal,
    harmonic_overlap,
    overlap_report,
    period_marginal,
    summarize_tuple,
)
from .errors import (
    CadenceError,
    ConfigError,
    DataError,
    GridError,
    ParseError,
    SingularDesignError,
    SurrogateError,
    ValidationError,
)
from .jitter import JitterGrid, jitter_posterior, make_jitter_grid, marginalize_jitter
from .linear import DesignMatrix, LinearFit, build_design, fit_linear, laplace_log_evidence
from .priors import PriorConfig, resolve_priors
from .scan import (
    FrequencyGrid,
    ScanResult,
    make_grid,
    scan_1d,
    scan_2d,
    scan_greedy,
    scan_nf0,
    truncate_nf,
)
from .simulate import (
    CadenceSpec,
    Keplerian,
    SignalSpec,
    Sinusoid,
    gen_cadence,
    gen_signal,
    replicate_aliasing_experiment,
)
from .timeseries import TimeSeries, center_abscissa, load_timeseries, save_timeseries
