"""Vulnerability of a system under a perturbation, and how composition changes it.

``V = M(F) - M(F under delta)`` for a larger-is-better metric ``M``. A
multi-agent system amplifies a vulnerability when it scores below the
single-agent baseline under the same perturbation and attenuates it when it
scores above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Optional, Sequence

import numpy as np

from ..core import StructuralError

CLASSES = ("amplifies", "attenuates", "neutral")
UNIT_TOL = 1e-9

PerformanceMetric = Callable[[Any, Any], float]


class MetricError(RuntimeError):
    pass


class NormalizationError(ValueError):
    pass


@dataclass(frozen=True)
class Perturbation:
    """``input_space`` transforms act on samples, ``model_space`` transforms on the system."""

    kind: str
    transform: Optional[Callable[[Any], Any]]
    magnitude: Any = None

    def __post_init__(self):
        if self.kind not in ("input_space", "model_space"):
            raise ValueError(f"unknown perturbation kind {self.kind!r}")

    @classmethod
    def identity(cls) -> "Perturbation":
        return cls("input_space", None, 0)

    @property
    def is_identity(self) -> bool:
        return self.transform is None

    def apply(self, system, samples):
        if self.transform is None:
            return system, samples
        if self.kind == "input_space":
            return system, self.transform(samples)
        return self.transform(system), samples


@dataclass(frozen=True)
class VulnerabilityReport:
    metric_clean: float
    metric_perturbed: float
    V: float
    baselines: dict = field(default_factory=dict)
    classification: Optional[str] = None  # set by the comparative evaluators
    alignments: tuple = ()

    def to_json(self) -> dict:
        return {
            "metric_clean": self.metric_clean,
            "metric_perturbed": self.metric_perturbed,
            "V": self.V,
            "baselines": dict(self.baselines),
            "classification": self.classification,
            "alignments": [dict(a) for a in self.alignments],
        }


def _score(metric, system, samples, which: str) -> float:
    try:
        s = float(metric(system, samples))
    except Exception as exc:
        raise MetricError(f"metric failed on the {which} configuration: {exc}") from exc
    if not math.isfinite(s):
        raise MetricError(f"metric returned non-finite {s!r} on the {which} configuration")
    return s


def vulnerability(system, metric: PerformanceMetric, samples, delta: Perturbation) -> VulnerabilityReport:
    clean = _score(metric, system, samples, "clean")
    if delta.is_identity:
        return VulnerabilityReport(clean, clean, 0.0)
    sys_p, samples_p = delta.apply(system, samples)
    pert = _score(metric, sys_p, samples_p, "perturbed")
    return VulnerabilityReport(clean, pert, clean - pert)


def classify_propagation(metric_multi: float, metric_single: float, tolerance: float) -> str:
    if metric_multi < metric_single - tolerance:
        return "amplifies"
    if metric_multi > metric_single + tolerance:
        return "attenuates"
    return "neutral"


def _check_unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or abs(float(np.linalg.norm(v)) - 1.0) > UNIT_TOL:
        raise NormalizationError(f"direction {v.tolist()} is not unit-norm within {UNIT_TOL}")
    return v


def alignment_score(delta_a, delta_b) -> float:
    a, b = _check_unit(delta_a), _check_unit(delta_b)
    if a.shape != b.shape:
        raise StructuralError("direction vectors differ in dimension")
    return float(np.dot(a, b))


# --- star systems ---------------------------------------------------------

@dataclass(frozen=True)
class StarSystem:
    """Parallel branches on a shared input, combined by ``aggregator``.

    ``arity`` pins the branch count the aggregator was built for.
    """

    branches: tuple
    aggregator: Callable[[list], Any]
    arity: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "branches", tuple(self.branches))
        if not self.branches:
            raise StructuralError("a star needs at least one branch")
        if self.arity is not None and self.arity != len(self.branches):
            raise StructuralError(f"aggregator expects {self.arity} branches, got {len(self.branches)}")

    def __call__(self, x):
        return self.aggregator([g(x) for g in self.branches])


def majority_aggregator(outputs: list) -> int:
    """Strict majority of 0/1 outputs; ties go to 0."""
    return int(2 * sum(int(o) for o in outputs) > len(outputs))


def accuracy_metric(system, samples) -> float:
    """Fraction of ``(x, label)`` pairs the system gets right."""
    samples = list(samples)
    if not samples:
        raise ValueError("empty sample set")
    return sum(system(x) == y for x, y in samples) / len(samples)


def eval_star(star: StarSystem, metric: PerformanceMetric, samples, delta: Perturbation,
              tolerance: float = 0.0) -> VulnerabilityReport:
    """Star under ``delta`` versus its best branch under the same ``delta``."""
    if star.arity is not None and star.arity != len(star.branches):
        raise StructuralError(f"aggregator expects {star.arity} branches, got {len(star.branches)}")
    rep = vulnerability(star, metric, samples, delta)
    branch = [vulnerability(g, metric, samples, delta) for g in star.branches]
    best = max(b.metric_perturbed for b in branch)
    baselines = {"max_branch_perturbed": best,
                 "min_branch_perturbed": min(b.metric_perturbed for b in branch)}
    for i, b in enumerate(branch):
        baselines[f"branch{i}_clean"] = b.metric_clean
        baselines[f"branch{i}_perturbed"] = b.metric_perturbed
    return VulnerabilityReport(rep.metric_clean, rep.metric_perturbed, rep.V, baselines,
                               classify_propagation(rep.metric_perturbed, best, tolerance))


# --- cascades -------------------------------------------------------------

@dataclass(frozen=True)
class PipelineStage:
    """One stage ``g_i`` mapping an ``(n, in_dim)`` array to ``(n, out_dim)``."""

    id: str
    map: Callable[[np.ndarray], np.ndarray]
    direction: Optional[tuple] = None
    in_dim: Optional[int] = None
    out_dim: Optional[int] = None

    def __post_init__(self):
        if self.direction is not None:
            object.__setattr__(self, "direction", tuple(_check_unit(self.direction).tolist()))

    def __call__(self, x):
        return self.map(x)


@dataclass(frozen=True)
class Pipeline:
    stages: tuple

    def __call__(self, x):
        for g in self.stages:
            x = g(x)
        return x


@dataclass(frozen=True)
class PairedSamples:
    """Observed inputs alongside the clean inputs they were derived from."""

    observed: np.ndarray
    reference: np.ndarray


def displacement_metric(system, samples: PairedSamples) -> float:
    """Negative mean distance between outputs on observed and on reference inputs."""
    diff = system(samples.observed) - system(samples.reference)
    return 0.0 - float(np.mean(np.linalg.norm(diff, axis=1)))  # 0.0 - x avoids a signed zero


@dataclass(frozen=True)
class MixtureInput:
    """Draws from ``(1 - alpha) mu + alpha nu``.

    ``clean_sampler(n, rng)`` draws from ``mu``; ``trigger(x, rng)`` turns clean
    rows into triggered ones, so ``nu`` is the push-forward of ``mu``.
    """

    alpha: float
    clean_sampler: Callable[[int, np.random.Generator], np.ndarray]
    trigger: Callable[[np.ndarray, np.random.Generator], np.ndarray]

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")

    def draw(self, n: int, rng: np.random.Generator):
        """Return clean samples, the matching mixture samples, and the trigger mask."""
        ref = np.asarray(self.clean_sampler(n, rng), dtype=np.float64)
        mask = rng.random(n) < self.alpha
        mixed = ref.copy()
        if mask.any():
            mixed[mask] = self.trigger(ref[mask], rng)
        return PairedSamples(ref, ref), PairedSamples(mixed, ref), mask


def _check_composable(stages: Sequence[PipelineStage], probe: np.ndarray) -> None:
    for a, b in zip(stages, stages[1:]):
        if a.out_dim is not None and b.in_dim is not None and a.out_dim != b.in_dim:
            raise StructuralError(f"stage {a.id!r} emits dim {a.out_dim}, {b.id!r} expects {b.in_dim}")
    x = probe
    for g in stages:
        if g.in_dim is not None and x.shape[1] != g.in_dim:
            raise StructuralError(f"stage {g.id!r} expects dim {g.in_dim}, got {x.shape[1]}")
        try:
            x = np.asarray(g(x))
        except ValueError as exc:
            raise StructuralError(f"stage {g.id!r} cannot consume its input: {exc}") from exc
        if x.ndim != 2 or x.shape[0] != probe.shape[0]:
            raise StructuralError(f"stage {g.id!r} returned shape {x.shape}")


def eval_cascade(stages: Sequence[PipelineStage], metric: PerformanceMetric, mixture: MixtureInput,
                 delta: Optional[Perturbation] = None, n_samples: int = 2000, rng=None,
                 tolerance: float = 1e-9) -> VulnerabilityReport:
    """Cascade on the triggered mixture (then ``delta``) versus its first stage alone.

    The clean configuration is the trigger-free draw with the unperturbed system.
    """
    stages = list(stages)
    if not stages:
        raise StructuralError("a cascade needs at least one stage")
    rng = rng if rng is not None else np.random.default_rng(0)
    delta = delta or Perturbation.identity()
    clean, mixed, _ = mixture.draw(n_samples, rng)
    _check_composable(stages, clean.reference[: min(4, n_samples)])

    whole = Pipeline(tuple(stages))

    def report_for(system):
        sys_p, samples_p = delta.apply(system, mixed)
        base = _score(metric, system, clean, "clean")
        pert = _score(metric, sys_p, samples_p, "perturbed")
        return VulnerabilityReport(base, pert, base - pert)

    rep = report_for(whole)
    single = rep if len(stages) == 1 else report_for(stages[0])
    aligns = tuple(
        {"stages": [a.id, b.id], "score": alignment_score(a.direction, b.direction)}
        for a, b in zip(stages, stages[1:])
        if a.direction is not None and b.direction is not None
    )
    baselines = {"first_stage_clean": single.metric_clean, "first_stage_perturbed": single.metric_perturbed}
    return VulnerabilityReport(rep.metric_clean, rep.metric_perturbed, rep.V, baselines,
                               classify_propagation(rep.metric_perturbed, single.metric_perturbed, tolerance),
                               aligns)
