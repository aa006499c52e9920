"""Two-agent attribution pipeline: upstream feature selection, downstream classification.

Agent 1 ranks features with a regression forest on ``(X1, y_signal)``; Agent 2
classifies cell types on its own clean data restricted to Agent 1's picks.
Corrupting Agent 1's matrix degrades the picks, and the damage reaches
Agent 2 only through the indices it is handed.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass, field

import numpy as np

from ..ensemble.trees import WeakLearnerParams, fit_classifier, forest_importances

ARMS = ("clean_selected", "corrupted_selected", "all_features")


@dataclass(frozen=True)
class SyntheticCellsConfig:
    d: int = 1000
    n1: int = 1000
    n2: int = 200
    m_signal: int = 20
    classes: int = 5
    scale_factor: float = 0.1
    noise_sigma: float = 1.0
    m_select: int = 50

    def __post_init__(self):
        if not 0 <= self.m_signal <= self.m_select <= self.d:
            raise ValueError("need m_signal <= m_select <= d")
        if self.n2 < 2 * self.classes:
            raise ValueError("n2 must be at least 2 * classes")


@dataclass(frozen=True)
class SelectionParams:
    """Regression forest used by Agent 1 to rank features."""

    n_trees: int = 20
    max_depth: int = 4
    min_leaf: int = 5
    max_features: float = 0.3

    def tree_params(self) -> WeakLearnerParams:
        return WeakLearnerParams(self.max_depth, self.min_leaf, self.max_features)


@dataclass(frozen=True)
class ClassifierParams:
    """Agent 2's depth-limited classification tree."""

    max_depth: int = 4
    min_leaf: int = 5


@dataclass
class CellData:
    X1: np.ndarray
    y_signal: np.ndarray
    X2: np.ndarray
    y_type: np.ndarray
    signal_indices: np.ndarray  # ground truth, for evaluation only


def generate_synthetic_cells(config: SyntheticCellsConfig, rng) -> CellData:
    """Draw both agents' data from a shared set of signal-bearing columns.

    ``y_signal`` is a +/-1-weighted sum of the signal columns plus unit
    noise. Cell type is the argmax of ``classes`` random linear scores over
    the same columns, so features that predict the signal also predict type.
    """
    d, m = config.d, config.m_signal
    signal = np.sort(rng.choice(d, size=m, replace=False))
    X1 = rng.standard_normal((config.n1, d))
    weights = rng.choice([-1.0, 1.0], size=m)
    y_signal = X1[:, signal] @ weights + rng.standard_normal(config.n1)
    X2 = rng.standard_normal((config.n2, d))
    class_dirs = rng.standard_normal((m, config.classes))
    if m == 0:
        y_type = rng.integers(config.classes, size=config.n2)
    else:
        y_type = np.argmax(X2[:, signal] @ class_dirs, axis=1)
    return CellData(X1, y_signal, X2, y_type.astype(np.intp), signal)


def corrupt_features(X, signal_indices, scale_factor: float, noise_sigma: float, rng) -> np.ndarray:
    """Scale the signal columns, then add Gaussian noise to every entry. Returns a new matrix."""
    X = np.asarray(X, dtype=np.float64)
    signal_indices = np.asarray(signal_indices, dtype=np.intp)
    if signal_indices.size and (signal_indices.min() < 0 or signal_indices.max() >= X.shape[1]):
        raise IndexError("signal index outside the column range")
    out = X.copy()
    out[:, signal_indices] *= scale_factor
    if noise_sigma != 0:
        out += rng.normal(0.0, noise_sigma, size=out.shape)
    return out


@dataclass
class FeatureSelection:
    indices: np.ndarray
    importances: np.ndarray = field(repr=False)
    degenerate: bool = False  # constant target: importances undefined


def select_features(X, y, m_select: int, params: SelectionParams | None = None, rng=None) -> FeatureSelection:
    """Top ``m_select`` columns by forest impurity-decrease importance.

    Ties rank the lower column index first. A constant target has no
    importances; the first ``m_select`` columns are returned and the
    selection is flagged degenerate.
    """
    params = params or SelectionParams()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    d = X.shape[1]
    if m_select > d:
        raise ValueError("m_select exceeds the number of columns")
    if np.all(y == y[0]):
        warnings.warn("constant target: feature importances undefined", RuntimeWarning, stacklevel=2)
        return FeatureSelection(np.arange(m_select), np.zeros(d), degenerate=True)
    imp = forest_importances(X, y, params.n_trees, params.tree_params(), rng)
    order = np.lexsort((np.arange(d), -imp))
    return FeatureSelection(np.sort(order[:m_select]), imp)


def macro_f1(predictions, labels) -> float:
    """Unweighted mean per-class F1 over classes seen in labels or predictions."""
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape:
        raise ValueError("predictions and labels differ in length")
    if labels.size == 0:
        raise ValueError("labels must be non-empty")
    scores = []
    for c in np.union1d(predictions, labels):
        tp = np.sum((predictions == c) & (labels == c))
        fp = np.sum((predictions == c) & (labels != c))
        fn = np.sum((predictions != c) & (labels == c))
        denom = 2 * tp + fp + fn
        scores.append(2 * tp / denom if denom else 0.0)
    return float(np.mean(scores))


def agent2_score(X2, y_type, features, n_classes: int, params: ClassifierParams, rng) -> float:
    """Macro-F1 of Agent 2 on the second half of its samples after training on the first."""
    half = X2.shape[0] // 2
    Xf = X2[:, features]
    tree = fit_classifier(Xf[:half], y_type[:half], n_classes,
                          WeakLearnerParams(params.max_depth, params.min_leaf), rng)
    return macro_f1(tree.predict(Xf[half:]), y_type[half:])


@dataclass
class AttributionResult:
    scores: dict[str, list[float]]  # arm -> per-replicate Macro-F1
    signal_recall: dict[str, list[float]]  # arm -> fraction of signal columns selected

    def mean(self, arm: str) -> float:
        return float(np.mean(self.scores[arm]))

    def std(self, arm: str) -> float:
        return float(np.std(self.scores[arm], ddof=1)) if len(self.scores[arm]) > 1 else 0.0

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["arm", "replicate", "macro_f1"])
        for arm in ARMS:
            for rep, s in enumerate(self.scores[arm]):
                w.writerow([arm, rep, f"{s:.6f}"])
        for arm in ARMS:
            w.writerow([arm, "mean", f"{self.mean(arm):.6f}"])
            w.writerow([arm, "std", f"{self.std(arm):.6f}"])
        return buf.getvalue()


def run_attribution_experiment(
    config: SyntheticCellsConfig | None = None,
    replicates: int = 10,
    seed: int = 42,
    selection: SelectionParams | None = None,
    classifier: ClassifierParams | None = None,
) -> AttributionResult:
    config = config or SyntheticCellsConfig()
    selection = selection or SelectionParams()
    classifier = classifier or ClassifierParams()
    scores = {arm: [] for arm in ARMS}
    recall = {arm: [] for arm in ARMS}
    for rep in range(replicates):
        ss = np.random.SeedSequence(seed, spawn_key=(rep,))
        data_rng, corrupt_rng, sel_rng, clf_rng = (np.random.default_rng(s) for s in ss.spawn(4))
        data = generate_synthetic_cells(config, data_rng)
        X1_bad = corrupt_features(data.X1, data.signal_indices, config.scale_factor,
                                  config.noise_sigma, corrupt_rng)
        # both arms select with the same forest seed so neutral corruption gives identical picks
        sel_seed = int(sel_rng.integers(2**63))
        picks = {
            "clean_selected": select_features(data.X1, data.y_signal, config.m_select, selection,
                                              np.random.default_rng(sel_seed)).indices,
            "corrupted_selected": select_features(X1_bad, data.y_signal, config.m_select, selection,
                                                  np.random.default_rng(sel_seed)).indices,
            "all_features": np.arange(config.d),
        }
        clf_seed = int(clf_rng.integers(2**63))
        for arm in ARMS:
            feats = picks[arm]
            scores[arm].append(agent2_score(data.X2, data.y_type, feats, config.classes, classifier,
                                            np.random.default_rng(clf_seed)))
            hit = np.intersect1d(feats, data.signal_indices).size
            recall[arm].append(hit / max(1, data.signal_indices.size))
    return AttributionResult(scores, recall)
