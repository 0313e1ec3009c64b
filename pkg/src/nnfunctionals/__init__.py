"""Weighted nearest-neighbour estimators of one- and two-sample integral functionals."""

__version__ = "0.1.0"

from .densities import Gaussian, SphericalBeta, TruthOracle, Uniform, parse_model, truth
from .diagnostics import ClassParams, DerivedParams, derive_params, k_range
from .errors import CoincidentPointsError, DomainError, EstimationError, SampleError, WeightInfeasibleError
from .estimators import (
    EstimateReport,
    EstimatorConfig,
    Geometry,
    estimate,
    kl_debiased_estimate,
    naive_estimate,
    one_sample_estimate,
    oracle_estimate,
    renyi_debiased_estimate,
    weighted_estimate,
)
from .functionals import (
    FunctionalSpec,
    OneSampleSpec,
    Regularity,
    intfg,
    kl,
    parse_functional,
    renyi,
    renyi_entropy,
    shannon,
    weighted_phi_divergence,
)
from .geometry import Sample, knn_brute, knn_cross, knn_within
from .sim import ExperimentConfig, ExperimentResult, parse_config, run_experiment
from .uncertainty import ConfidenceInterval, VarianceReport, confidence_interval, variance_estimate
from .weights import WeightVector, solve_general_weights, solve_kl_weights, solve_renyi_weights

__all__ = [name for name in dir() if not name.startswith("_")]
