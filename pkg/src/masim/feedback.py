"""Bayesian conditioning of a finite-support transition kernel on feedback.

The feedback-free kernel is the prior over ``(state, output)``; a likelihood
``lik(feedback, output, input_without_feedback)`` reweights it.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .core import AgentState, FeedbackSignal, InputBundle, Value, canonical_json

NORMALIZATION_TOL = 1e-12

LikelihoodModel = Callable[[FeedbackSignal, Value, InputBundle], float]


class InconsistentFeedbackError(ValueError):
    """Every support point gives the observed feedback zero likelihood."""


@dataclass(frozen=True)
class DiscreteDistribution:
    support: tuple  # (AgentState, Value) pairs
    probs: tuple

    def __init__(self, support: Sequence[tuple[AgentState, Value]], probs: Sequence[float]):
        support = tuple((s, y) for s, y in support)
        probs = tuple(float(p) for p in probs)
        if len(support) != len(probs) or not support:
            raise ValueError("support and probs must be non-empty and of equal length")
        if any(not math.isfinite(p) or p < 0 for p in probs):
            raise ValueError("probabilities must be finite and non-negative")
        if abs(math.fsum(probs) - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"probabilities sum to {math.fsum(probs)!r}, not 1")
        keys = [canonical_json([s.to_json(), y.to_json()]) for s, y in support]
        if len(set(keys)) != len(keys):
            raise ValueError("support entries must be distinct")
        object.__setattr__(self, "support", support)
        object.__setattr__(self, "probs", probs)

    def sample(self, rng: np.random.Generator) -> tuple[AgentState, Value]:
        """Inverse-CDF draw; consumes exactly one uniform."""
        u = rng.random()
        last = 0
        for i, c in enumerate(itertools.accumulate(self.probs)):
            if self.probs[i] > 0:
                last = i
                if u < c:
                    return self.support[i]
        return self.support[last]  # u beyond a cumulative sum that rounded below 1

    def prob_of_output(self, output: Value) -> float:
        return math.fsum(p for (_, y), p in zip(self.support, self.probs) if y == output)


def posterior_update(prior: DiscreteDistribution, lik: LikelihoodModel, feedback: FeedbackSignal,
                     input_wo_feedback: InputBundle) -> DiscreteDistribution:
    weights = []
    for (_, y), p in zip(prior.support, prior.probs):
        w = float(lik(feedback, y, input_wo_feedback))
        if not math.isfinite(w) or w < 0:
            raise ValueError(f"likelihood returned {w!r}; must be finite and non-negative")
        weights.append(w * p)
    z = math.fsum(weights)
    if z == 0:
        raise InconsistentFeedbackError("feedback has zero likelihood under every support point")
    return DiscreteDistribution(prior.support, [w / z for w in weights])


def kernel_with_feedback(prior_kernel: Callable[[AgentState, InputBundle], DiscreteDistribution],
                         lik: LikelihoodModel):
    """Transition kernel sampling the posterior when feedback is present, else the prior."""

    def kernel(state: AgentState, bundle: InputBundle, rng: np.random.Generator):
        base = bundle.without_feedback()
        dist = prior_kernel(state, base)
        if bundle.feedback is not None:
            dist = posterior_update(dist, lik, bundle.feedback, base)
        return dist.sample(rng)

    return kernel
