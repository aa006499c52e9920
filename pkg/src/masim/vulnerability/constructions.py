"""Small analytic systems whose propagation class is known in closed form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .propagation import (
    MixtureInput,
    Perturbation,
    PipelineStage,
    StarSystem,
    majority_aggregator,
)

E1 = (1.0, 0.0)
E2 = (0.0, 1.0)


def stretch_stage(stage_id: str, direction=E1, gain: float = 1.0) -> PipelineStage:
    """``x -> x + gain * <x, d> d``: magnifies displacement along ``d`` by ``1 + gain``."""
    d = np.asarray(direction, dtype=np.float64)
    A = np.eye(d.size) + gain * np.outer(d, d)
    return PipelineStage(stage_id, lambda x: x @ A.T, tuple(d), d.size, d.size)


def projection_stage(stage_id: str, removed=E1, kept=E2) -> PipelineStage:
    """``x -> x - <x, r> r``; its declared direction is ``kept``, orthogonal to ``r``."""
    r = np.asarray(removed, dtype=np.float64)
    P = np.eye(r.size) - np.outer(r, r)
    return PipelineStage(stage_id, lambda x: x @ P.T, tuple(kept), r.size, r.size)


def trigger_mixture(alpha: float = 0.3, shift: float = 1.0, direction=E1) -> MixtureInput:
    """Standard normal inputs; triggered rows are shifted by ``shift`` along ``direction``."""
    d = np.asarray(direction, dtype=np.float64)
    return MixtureInput(alpha,
                        lambda n, rng: rng.standard_normal((n, d.size)),
                        lambda x, rng: x + shift * d)


def aligned_cascade(n_stages: int, gain: float = 1.0) -> list[PipelineStage]:
    return [stretch_stage(f"g{i + 1}", E1, gain) for i in range(n_stages)]


def orthogonal_cascade(gain: float = 1.0) -> list[PipelineStage]:
    return [stretch_stage("g1", E1, gain), projection_stage("g2", E1, E2)]


# --- boolean stars ---------------------------------------------------------
# Items carry label 1. A sample is (item, triggered); a branch is wrong on its
# fixed error set, and a trigger-sensitive branch flips on triggered items.

@dataclass(frozen=True)
class BooleanBranch:
    wrong: frozenset
    sensitive: bool = False

    def __call__(self, x) -> int:
        item, triggered = x
        correct = item not in self.wrong
        if self.sensitive and triggered:
            correct = not correct
        return int(correct)


def boolean_samples(n_items: int = 10):
    return [((i, False), 1) for i in range(n_items)]


def trigger_items(items) -> Perturbation:
    items = frozenset(items)
    return Perturbation("input_space",
                        lambda samples: [((i, trig or i in items), y) for (i, trig), y in samples],
                        len(items))


def star(branches) -> StarSystem:
    return StarSystem(tuple(branches), majority_aggregator, arity=len(branches))


def shared_trigger_star():
    """All branches flip on the trigger; two already share errors, so the vote inherits them."""
    branches = [BooleanBranch(frozenset(), True),
                BooleanBranch(frozenset({0, 1}), True),
                BooleanBranch(frozenset({0, 1}), True)]
    return star(branches), boolean_samples(10), trigger_items({2, 3})


def one_sensitive_star():
    """Only one branch reacts to the trigger; the other two outvote it everywhere."""
    branches = [BooleanBranch(frozenset({0})),
                BooleanBranch(frozenset({1})),
                BooleanBranch(frozenset(), True)]
    return star(branches), boolean_samples(10), trigger_items({2, 3})


def identical_star(n: int = 3):
    branches = [BooleanBranch(frozenset({0}), True)] * n
    return star(branches), boolean_samples(10), trigger_items({2, 3})
