"""Labeled datasets, the builtin Gaussian-blob source, and overlap splits."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class CapacityError(ValueError):
    """Source dataset too small for the requested overlap plan."""


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels)
        if self.features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on row count")

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def subset(self, rows) -> "LabeledDataset":
        return LabeledDataset(self.features[rows], self.labels[rows])


def builtin_blobs(n: int = 5000, d: int = 10, separation: float = 1.5, rng=None) -> LabeledDataset:
    """Two unit-variance Gaussian classes whose means are ``separation`` apart.

    The mean offset runs along the all-ones diagonal, so no single
    axis-aligned split captures it.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    labels = np.arange(n) % 2
    rng.shuffle(labels)
    direction = np.ones(d) / math.sqrt(d)
    offset = np.where(labels[:, None] == 1, 0.5, -0.5) * separation * direction
    features = rng.standard_normal((n, d)) + offset
    return LabeledDataset(features, labels)


def load_csv(path) -> LabeledDataset:
    """Read a CSV with a header row, numeric feature columns and a ``label`` column."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if "label" not in header:
            raise ValueError(f"{path}: no 'label' column in header")
        li = header.index("label")
        feats, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            labels.append(row[li])
            try:
                feats.append([float(v) for i, v in enumerate(row) if i != li])
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: non-numeric feature ({exc})") from None
    labels = np.asarray(labels)
    try:
        labels = labels.astype(np.int64)
    except ValueError:
        pass
    return LabeledDataset(np.asarray(feats, dtype=np.float64).reshape(len(labels), -1), labels)


def write_csv(dataset: LabeledDataset, path) -> None:
    d = dataset.features.shape[1]
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"x{i}" for i in range(d)] + ["label"])
        for row, lab in zip(dataset.features, dataset.labels):
            w.writerow([repr(float(v)) for v in row] + [lab])


@dataclass(frozen=True)
class OverlapPlan:
    rho: float
    k: int
    n_per_agent: int = 100

    def __post_init__(self):
        if not 0.0 <= self.rho <= 1.0:
            raise ValueError("rho must lie in [0, 1]")
        if self.k < 1 or self.n_per_agent < 1:
            raise ValueError("k and n_per_agent must be positive")

    @property
    def n_shared(self) -> int:
        # round first so 0.07 * 100 does not ceil to 8
        return int(math.ceil(round(self.rho * self.n_per_agent, 9)))

    @property
    def rows_needed(self) -> int:
        return self.n_shared + self.k * (self.n_per_agent - self.n_shared)


def build_overlap_datasets(source: LabeledDataset, plan: OverlapPlan, rng) -> list[LabeledDataset]:
    """Split ``source`` into ``k`` training sets sharing exactly ``n_shared`` rows.

    The shared pool comes first in every set; the unique remainders are
    pairwise disjoint.
    """
    rows = overlap_row_indices(len(source), plan, rng)
    return [source.subset(r) for r in rows]


def overlap_row_indices(n_source: int, plan: OverlapPlan, rng) -> list[np.ndarray]:
    if plan.rows_needed > n_source:
        raise CapacityError(
            f"plan rho={plan.rho}, k={plan.k}, n={plan.n_per_agent} needs {plan.rows_needed} rows, "
            f"source has {n_source}"
        )
    perm = rng.permutation(n_source)
    shared = perm[: plan.n_shared]
    n_unique = plan.n_per_agent - plan.n_shared
    rest = perm[plan.n_shared :]
    return [
        np.concatenate([shared, rest[a * n_unique : (a + 1) * n_unique]])
        for a in range(plan.k)
    ]
