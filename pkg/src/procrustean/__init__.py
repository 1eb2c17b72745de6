"""Smoothed Procrustes means of planar landmark configurations."""

from .criteria import CriterionContext, eval_D, eval_D0, eval_M, eval_M0, eval_Mbar, grad_D, hess_D0_at_section
from .errors import (
    ConfigError,
    DegenerateConfiguration,
    DimensionMismatch,
    EmptyResult,
    EvenK,
    InvalidCutoff,
    NoConvergence,
    ProcrusteanError,
    SingularAlignment,
)
from .estimator import (
    Constraints,
    EstimationResult,
    OptimizerOptions,
    closed_form_b,
    estimate_rotation_scaling,
    full_procrustes_mean,
    mean_at_section,
    partial_procrustes_mean,
    section_point,
    smoothed_procrustes_mean,
)
from .geometry import ParameterVector, Similarity, act, compose, inverse, preshape, procrustes_distance, split
from .model import MeanPattern, NoiseModel, generate_dataset, reference_curve, sample_deformations, sample_noise
from .spectral import cutoff, smooth, smoothing_matrix, table_cutoff

__version__ = "0.1.0"
