"""Kernel-based identification of linear systems from noisy, incomplete
input-output data, with joint smoothing of the missing samples."""

from .em import SolverConfig, naive_identify, run_em, smooth_output
from .errors import IdentifiabilityError, NumericalFailure
from .identifiability import IdentifiabilityReport, check_rank, check_structural
from .kernel import Hyperparameters, kernel_logdet, kernel_matrix, kernel_solve
from .linops import SelectionOperator, scatter, select, toeplitz
from .metrics import fit, median
from .model import Dataset, EMState, NoiseModel, SolveResult, dataset_from_records
from .posterior import PosteriorMoments, marginal_loglik, posterior_moments

__all__ = [
    "Dataset", "EMState", "Hyperparameters", "IdentifiabilityError",
    "IdentifiabilityReport", "NoiseModel", "NumericalFailure", "PosteriorMoments",
    "SelectionOperator", "SolveResult", "SolverConfig", "check_rank",
    "check_structural", "dataset_from_records", "fit", "kernel_logdet",
    "kernel_matrix", "kernel_solve", "marginal_loglik", "median", "naive_identify",
    "posterior_moments", "run_em", "scatter", "select", "smooth_output", "toeplitz",
]
