"""Majority voting, the Hoeffding bound, and the redundancy failure modes.

Votes and correctness indicators are 0/1 integers. Where a function works in
correctness space (``X_i = 1`` means agent ``i`` is right), the tie rule is
read the same way: ``one_wins`` counts a tie as a correct final decision,
which is the ``sum >= k/2`` convention.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

TIE_RULES = ("random", "one_wins", "zero_wins")

# Poisson-binomial enumeration budget for the exact oracle
EXACT_MAX_AGENTS = 25


class BudgetError(ValueError):
    """Raised when an exact computation exceeds its enumeration budget."""


class UnsupportedConfiguration(ValueError):
    pass


def _check_tie_rule(tie_rule: str) -> None:
    if tie_rule not in TIE_RULES:
        raise ValueError(f"unknown tie rule {tie_rule!r}; expected one of {TIE_RULES}")


def majority_vote(votes: Sequence[int], tie_rule: str = "random", rng=None) -> int:
    """Return 1 iff more than half the votes are 1; exact ties follow ``tie_rule``."""
    _check_tie_rule(tie_rule)
    k = len(votes)
    if k == 0:
        raise ValueError("majority_vote needs at least one vote")
    ones = int(sum(int(v) for v in votes))
    if 2 * ones > k:
        return 1
    if 2 * ones < k:
        return 0
    if tie_rule == "one_wins":
        return 1
    if tie_rule == "zero_wins":
        return 0
    if rng is None:
        raise ValueError("random tie rule needs an rng")
    return int(rng.integers(2))


def plurality_vote(predictions: np.ndarray, n_classes: int, rng) -> np.ndarray:
    """Column-wise plurality over a (voters, samples) label matrix.

    Ties between the top classes are broken uniformly at random, per sample.
    For two classes this is :func:`majority_vote` with the random tie rule.
    """
    predictions = np.asarray(predictions)
    n = predictions.shape[1]
    counts = np.zeros((n, n_classes), dtype=np.int64)
    cols = np.arange(n)
    for row in predictions:
        np.add.at(counts, (cols, row), 1)
    top = counts == counts.max(axis=1, keepdims=True)
    keys = rng.random((n, n_classes))
    keys[~top] = -1.0
    return np.argmax(keys, axis=1)


def hoeffding_error_bound(k: int, e_bar: float) -> float:
    """Upper bound on P(mean correctness < 1/2) for ``k`` independent agents.

    Returns 1.0 when the margin ``(1 - e_bar) - 1/2`` is not positive, where
    the inequality says nothing.
    """
    if k < 1:
        raise ValueError("k must be positive")
    if not e_bar < 0.5:
        return 1.0
    margin = (1.0 - e_bar) - 0.5
    return math.exp(-2.0 * k * margin * margin)


def poisson_binomial_pmf(success_probs: Sequence[float]) -> np.ndarray:
    """PMF of the number of successes among independent Bernoulli trials."""
    pmf = np.array([1.0])
    for p in success_probs:
        nxt = np.zeros(pmf.size + 1)
        nxt[:-1] = pmf * (1.0 - p)
        nxt[1:] += pmf * p
        pmf = nxt
    return pmf


def exact_majority_error(error_rates: Sequence[float], tie_rule: str = "one_wins") -> float:
    """Exact P(wrong final decision) for independent agents with the given error rates."""
    _check_tie_rule(tie_rule)
    k = len(error_rates)
    if k == 0:
        raise ValueError("need at least one agent")
    if k > EXACT_MAX_AGENTS:
        raise BudgetError(f"{k} agents exceeds the exact enumeration budget of {EXACT_MAX_AGENTS}")
    pmf = poisson_binomial_pmf([1.0 - e for e in error_rates])
    # s correct votes: wrong if 2s < k; tie if 2s == k
    wrong = sum(pmf[s] for s in range(k + 1) if 2 * s < k)
    if k % 2 == 0:
        tie_weight = {"one_wins": 0.0, "zero_wins": 1.0, "random": 0.5}[tie_rule]
        wrong += tie_weight * pmf[k // 2]
    return float(min(1.0, max(0.0, wrong)))


def pairwise_agreement(e_i: float, e_j: float, lam: float) -> float:
    """E[X_i X_j] for two agents whose correctness has correlation ``lam``."""
    return (1.0 - e_i) * (1.0 - e_j) + lam * math.sqrt((1.0 - e_i) * e_i) * math.sqrt((1.0 - e_j) * e_j)


@dataclass(frozen=True)
class CorrelatedCohort:
    k: int
    error_rates: tuple[float, ...]
    lam: float

    def __post_init__(self):
        if len(self.error_rates) != self.k:
            raise ValueError("len(error_rates) must equal k")
        if not 0.0 <= self.lam <= 1.0:
            raise ValueError("lambda must lie in [0, 1]")


def sample_correlated_cohort(cohort: CorrelatedCohort, trials: int, rng) -> np.ndarray:
    """Correctness indicators, shape (trials, k), with pairwise correlation ``lam``.

    Each trial copies one shared Bernoulli(1 - e) outcome to every agent with
    probability ``lam`` and otherwise draws agents independently. The
    correlation is exact only for equal marginals, so unequal rates are
    rejected.
    """
    rates = set(cohort.error_rates)
    if len(rates) != 1:
        raise UnsupportedConfiguration("correlated sampling requires equal error rates")
    p = 1.0 - cohort.error_rates[0]
    shared_trial = rng.random(trials) < cohort.lam
    shared = rng.random(trials) < p
    independent = rng.random((trials, cohort.k)) < p
    out = np.where(shared_trial[:, None], shared[:, None], independent)
    return out.astype(np.int8)


@dataclass(frozen=True)
class MisalignedSplit:
    k0: int
    k: int
    e0: float
    e1: float

    def __post_init__(self):
        if not 1 <= self.k0 <= self.k:
            raise ValueError("need 1 <= k0 <= k")

    def error_rates(self) -> list[float]:
        return [self.e0] * self.k0 + [self.e1] * (self.k - self.k0)


def misaligned_majority_error(split: MisalignedSplit, trials: int, rng) -> float:
    """Monte Carlo estimate of P(total correct < k/2) with an aligned and a misaligned group."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    aligned = rng.binomial(split.k0, 1.0 - split.e0, size=trials)
    misaligned = rng.binomial(split.k - split.k0, 1.0 - split.e1, size=trials)
    total = aligned + misaligned
    return float(np.mean(2 * total < split.k))
