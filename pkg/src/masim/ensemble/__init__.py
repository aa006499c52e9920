"""Voting ensembles: error bounds, correlated cohorts, and the overlap-ratio experiment."""

from .data import CapacityError, LabeledDataset, OverlapPlan, build_overlap_datasets, builtin_blobs, load_csv
from .experiment import DEFAULT_K_GRID, DEFAULT_RHO_GRID, EnsembleResult, run_overlap_experiment
from .trees import Tree, WeakLearner, WeakLearnerParams, train_weak_learner
from .voting import (
    BudgetError,
    CorrelatedCohort,
    MisalignedSplit,
    UnsupportedConfiguration,
    exact_majority_error,
    hoeffding_error_bound,
    majority_vote,
    misaligned_majority_error,
    pairwise_agreement,
    sample_correlated_cohort,
)

__all__ = [
    "BudgetError",
    "CapacityError",
    "CorrelatedCohort",
    "DEFAULT_K_GRID",
    "DEFAULT_RHO_GRID",
    "EnsembleResult",
    "LabeledDataset",
    "MisalignedSplit",
    "OverlapPlan",
    "Tree",
    "UnsupportedConfiguration",
    "WeakLearner",
    "WeakLearnerParams",
    "build_overlap_datasets",
    "builtin_blobs",
    "exact_majority_error",
    "hoeffding_error_bound",
    "load_csv",
    "majority_vote",
    "misaligned_majority_error",
    "pairwise_agreement",
    "run_overlap_experiment",
    "sample_correlated_cohort",
    "train_weak_learner",
]
