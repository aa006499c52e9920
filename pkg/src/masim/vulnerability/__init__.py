"""Vulnerability propagation through star and cascade compositions, and the attribution experiment."""

from .attribution import (
    SyntheticCellsConfig,
    corrupt_features,
    generate_synthetic_cells,
    macro_f1,
    run_attribution_experiment,
    select_features,
)
from .propagation import (
    MixtureInput,
    Perturbation,
    PipelineStage,
    StarSystem,
    VulnerabilityReport,
    alignment_score,
    classify_propagation,
    eval_cascade,
    eval_star,
    vulnerability,
)

__all__ = [
    "MixtureInput",
    "Perturbation",
    "PipelineStage",
    "StarSystem",
    "SyntheticCellsConfig",
    "VulnerabilityReport",
    "alignment_score",
    "classify_propagation",
    "corrupt_features",
    "eval_cascade",
    "eval_star",
    "generate_synthetic_cells",
    "macro_f1",
    "run_attribution_experiment",
    "select_features",
    "vulnerability",
]
