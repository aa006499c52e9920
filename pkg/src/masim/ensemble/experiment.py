"""Overlap-ratio experiment: accuracy of voting ensembles vs data sharing.

Each (rho, k, replicate) cell draws its own RNG substream from
``SeedSequence(seed, spawn_key=(rho_index, k_index, replicate))``, so the
result grid does not depend on the worker count or cell order.
"""

from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .data import CapacityError, LabeledDataset, OverlapPlan, overlap_row_indices
from .trees import Tree, WeakLearnerParams, fit_classifier
from .voting import plurality_vote

DEFAULT_RHO_GRID = (0.0, 0.25, 0.5, 0.75, 1.0)
DEFAULT_K_GRID = (1, 5, 7, 11, 15)


@dataclass
class CellResult:
    rho: float
    k: int
    accuracies: list[float]
    error: str | None = None

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies)) if self.accuracies else float("nan")

    @property
    def std(self) -> float:
        if len(self.accuracies) < 2:
            return 0.0
        return float(np.std(self.accuracies, ddof=1))


@dataclass
class EnsembleResult:
    cells: dict[tuple[float, int], CellResult] = field(default_factory=dict)

    def cell(self, rho: float, k: int) -> CellResult:
        return self.cells[(rho, k)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["rho", "k", "mean_acc", "std_acc", "replicates"])
        for (rho, k), c in sorted(self.cells.items()):
            mean = "" if c.error else f"{c.mean:.6f}"
            std = "" if c.error else f"{c.std:.6f}"
            w.writerow([f"{rho:g}", k, mean, std, len(c.accuracies)])
        return buf.getvalue()


def cell_rng(seed: int, rho_index: int, k_index: int, replicate: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(rho_index, k_index, replicate)))


def encode_labels(labels) -> tuple[np.ndarray, np.ndarray]:
    classes, codes = np.unique(labels, return_inverse=True)
    return classes, codes.astype(np.intp)


def split_eval(source: LabeledDataset, eval_size: int, seed: int):
    """Hold out ``eval_size`` rows, disjoint from every training pool."""
    if not 0 < eval_size < len(source):
        raise ValueError("eval_size must be between 1 and len(source) - 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(2**31 - 1,)))
    perm = rng.permutation(len(source))
    return perm[eval_size:], perm[:eval_size]


def train_ensemble(X, y, n_classes, rows, params: WeakLearnerParams, rng) -> list[Tree]:
    """One tree per agent. All agents share one tie-break seed drawn from ``rng``."""
    tie_seed = int(rng.integers(2**63))
    return [
        fit_classifier(X[r], y[r], n_classes, params, np.random.default_rng(tie_seed))
        for r in rows
    ]


def run_cell(X_train, y_train, X_eval, y_eval, n_classes, plan: OverlapPlan,
             params: WeakLearnerParams, rng) -> tuple[float, list[Tree]]:
    rows = overlap_row_indices(len(y_train), plan, rng)
    trees = train_ensemble(X_train, y_train, n_classes, rows, params, rng)
    preds = np.stack([t.predict(X_eval) for t in trees])
    final = plurality_vote(preds, n_classes, rng)
    return float(np.mean(final == y_eval)), trees


def run_overlap_experiment(
    source: LabeledDataset,
    rho_grid=DEFAULT_RHO_GRID,
    k_grid=DEFAULT_K_GRID,
    replicates: int = 50,
    params: WeakLearnerParams | None = None,
    seed: int = 42,
    n_per_agent: int = 100,
    eval_size: int | None = None,
    workers: int = 1,
) -> EnsembleResult:
    params = params or WeakLearnerParams()
    if eval_size is None:
        eval_size = min(2000, len(source) // 3)
    classes, codes = encode_labels(source.labels)
    train_rows, eval_rows = split_eval(source, eval_size, seed)
    X_train = np.ascontiguousarray(source.features[train_rows])
    y_train = codes[train_rows]
    X_eval = np.ascontiguousarray(source.features[eval_rows])
    y_eval = codes[eval_rows]
    n_classes = len(classes)

    jobs = [
        (ri, rho, ki, k)
        for ri, rho in enumerate(rho_grid)
        for ki, k in enumerate(k_grid)
    ]

    def do(job):
        ri, rho, ki, k = job
        plan = OverlapPlan(rho=rho, k=k, n_per_agent=n_per_agent)
        if plan.rows_needed > len(y_train):
            return CellResult(rho, k, [], error=f"capacity: needs {plan.rows_needed} rows, have {len(y_train)}")
        accs = []
        for rep in range(replicates):
            acc, _ = run_cell(X_train, y_train, X_eval, y_eval, n_classes, plan, params,
                              cell_rng(seed, ri, ki, rep))
            accs.append(acc)
        return CellResult(rho, k, accs)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            cells = list(pool.map(do, jobs))
    else:
        cells = [do(j) for j in jobs]
    result = EnsembleResult()
    for c in cells:
        result.cells[(c.rho, c.k)] = c
    return result


__all__ = [
    "CapacityError",
    "CellResult",
    "EnsembleResult",
    "cell_rng",
    "run_cell",
    "run_overlap_experiment",
]
