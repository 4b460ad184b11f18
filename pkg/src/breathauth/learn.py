"""Decision trees, random forests, cross-validation, and the pair pipeline.

Trees are grown greedily on Gini impurity with a random feature subset per
node; forests aggregate bootstrapped trees by majority vote and accumulate
impurity-decrease feature importances. Each user pair gets a standard-scaler
plus forest pipeline tuned by exhaustive grid search under stratified k-fold
cross-validation.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import ClassTooSmallError, EmptyDataError, EmptyGridError


DEFAULT_GRID: dict[str, tuple] = {
    "n_trees": (50, 100, 200),
    "max_depth": (4, 8, None),
    "min_samples_split": (2, 5),
    "min_samples_leaf": (1, 3),
}

# One-point grid for quick desk-scale runs and benchmarks.
SMALL_GRID: dict[str, tuple] = {
    "n_trees": (50,),
    "max_depth": (8,),
    "min_samples_split": (2,),
    "min_samples_leaf": (1,),
}

CV_DISCARD_THRESHOLD = 0.60


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1
    features_per_split: int | None = None  # default: ceil(sqrt(d))

    def resolved_features_per_split(self, n_features: int) -> int:
        if self.features_per_split is not None:
            return min(self.features_per_split, n_features)
        return min(math.ceil(math.sqrt(n_features)), n_features)


@dataclass
class DecisionTree:
    """Array-encoded binary CART tree; children index -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray  # (n_nodes, 2) class counts of the samples routed there

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            internal = self.feature[node] >= 0
            if not np.any(internal):
                break
            rows = np.flatnonzero(internal)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] <= self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
        leaf_counts = self.counts[node]
        return (leaf_counts[:, 1] > leaf_counts[:, 0]).astype(np.int64)

    @property
    def n_nodes(self) -> int:
        return self.feature.size


def _validate_xy(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptyDataError("need a non-empty 2-D sample matrix")
    if y.shape != (X.shape[0],):
        raise EmptyDataError("labels must match the sample count")
    if not np.all(np.isin(y, (0, 1))):
        raise ValueError("labels must be binary 0/1")
    return X, y.astype(np.uint8)


def train_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams = ForestParams(),
    rng: np.random.Generator | None = None,
    importances_out: np.ndarray | None = None,
) -> DecisionTree:
    """Grow one tree; optionally accumulate impurity-decrease importances."""
    X, y = _validate_xy(X, y)
    rng = rng or np.random.default_rng(0)
    n, d = X.shape
    k_feats = params.resolved_features_per_split(d)

    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    counts: list[tuple[int, int]] = []

    def new_node(idx: np.ndarray) -> int:
        node_id = len(feature)
        ones = int(y[idx].sum())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        counts.append((idx.size - ones, ones))
        return node_id

    root_idx = np.arange(n, dtype=np.int64)
    stack = [(new_node(root_idx), root_idx, 0)]
    while stack:
        node_id, idx, depth = stack.pop()
        n0, n1 = counts[node_id]
        if n1 == 0 or n0 == 0:
            continue  # pure leaf
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        if idx.size < params.min_samples_split:
            continue
        cand = np.sort(rng.choice(d, size=k_feats, replace=False)).astype(np.int64)
        feat, thr, child_cost = _kernels.best_split(X, y, idx, cand, params.min_samples_leaf)
        if feat < 0:
            continue
        p0, p1 = n0 / idx.size, n1 / idx.size
        gain = (1.0 - p0 * p0 - p1 * p1) - child_cost
        # zero-gain splits are kept (CART default); an impure node may need
        # one before any impurity can drop, e.g. the first cut of exact XOR
        if importances_out is not None:
            importances_out[feat] += (idx.size / n) * max(gain, 0.0)
        go_left = X[idx, feat] <= thr
        left_idx = idx[go_left]
        right_idx = idx[~go_left]
        feature[node_id] = feat
        threshold[node_id] = thr
        left_id = new_node(left_idx)
        right_id = new_node(right_idx)
        left[node_id] = left_id
        right[node_id] = right_id
        stack.append((left_id, left_idx, depth + 1))
        stack.append((right_id, right_idx, depth + 1))

    return DecisionTree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        counts=np.asarray(counts, dtype=np.int64),
    )


@dataclass
class RandomForest:
    trees: list[DecisionTree]
    params: ForestParams
    seed: int
    importances: np.ndarray  # per feature, non-negative, sums to 1

    @property
    def n_trees(self) -> int:
        return len(self.trees)

    def vote_fractions(self, X: np.ndarray) -> np.ndarray:
        """Fraction of trees voting class 1, per row."""
        X = np.asarray(X, dtype=np.float64)
        votes = np.zeros(X.shape[0])
        for tree in self.trees:
            votes += tree.predict(X)
        return votes / len(self.trees)

    def predict(self, X: np.ndarray) -> np.ndarray:
        """Majority vote; exact ties resolve to class 0 (the pair's first user)."""
        return (self.vote_fractions(X) > 0.5).astype(np.int64)


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams = ForestParams(),
    seed: int = 0,
) -> RandomForest:
    """Bootstrap-aggregated trees with accumulated impurity importances."""
    X, y = _validate_xy(X, y)
    n, d = X.shape
    raw_importance = np.zeros(d)
    trees = []
    seqs = np.random.SeedSequence(seed).spawn(params.n_trees)
    for seq in seqs:
        rng = np.random.default_rng(seq)
        boot = rng.integers(0, n, size=n)
        trees.append(
            train_tree(X[boot], y[boot], params, rng=rng, importances_out=raw_importance)
        )
    total = raw_importance.sum()
    importances = raw_importance / total if total > 0.0 else raw_importance
    return RandomForest(trees=trees, params=params, seed=seed, importances=importances)


@dataclass(frozen=True)
class CVConfig:
    k: int = 5
    grid: dict[str, tuple] = field(default_factory=lambda: dict(DEFAULT_GRID))
    seed: int = 0

    def __post_init__(self) -> None:
        if self.k < 2:
            raise ValueError("need at least 2 folds")


def stratified_folds(y: np.ndarray, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Index folds preserving class proportions to within one sample."""
    folds: list[list[int]] = [[] for _ in range(k)]
    for cls in (0, 1):
        members = np.flatnonzero(y == cls)
        if members.size < k:
            raise ClassTooSmallError(f"class {cls} has {members.size} samples; need >= {k}")
        members = members[rng.permutation(members.size)]
        for pos, row in enumerate(members):
            folds[pos % k].append(int(row))
    return [np.sort(np.asarray(f, dtype=np.int64)) for f in folds]


def stratified_kfold_cv(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    cv: CVConfig,
) -> float:
    """Mean validation accuracy over k stratified folds."""
    X, y = _validate_xy(X, y)
    rng = np.random.default_rng(cv.seed)
    folds = stratified_folds(y, cv.k, rng)
    scores = []
    for i, fold in enumerate(folds):
        mask = np.ones(y.size, dtype=bool)
        mask[fold] = False
        forest = train_forest(X[mask], y[mask], params, seed=cv.seed + 7919 * (i + 1))
        predictions = forest.predict(X[fold])
        scores.append(float(np.mean(predictions == y[fold])))
    return float(np.mean(scores))


def grid_search(X: np.ndarray, y: np.ndarray, cv: CVConfig) -> tuple[dict, float]:
    """Exhaustive search over the CV grid; first point wins ties."""
    if not cv.grid or any(len(v) == 0 for v in cv.grid.values()):
        raise EmptyGridError("hyperparameter grid has no candidate points")
    names = list(cv.grid.keys())
    best_point: dict | None = None
    best_score = -np.inf
    for combo in itertools.product(*(cv.grid[n] for n in names)):
        point = dict(zip(names, combo))
        score = stratified_kfold_cv(X, y, ForestParams(**point), cv)
        if score > best_score:
            best_point, best_score = point, score
    assert best_point is not None
    return best_point, best_score


@dataclass(frozen=True)
class Discarded:
    """A pair whose tuned model scored at or below the discard threshold."""

    pair: tuple[str, str]
    cv_score: float


@dataclass
class ScalerModelPipeline:
    """Standard scaler fitted on the pair's pooled training rows, plus the forest."""

    pair: tuple[str, str]
    mu: np.ndarray
    sigma: np.ndarray
    model: RandomForest
    cv_score: float

    def transform(self, rows: np.ndarray) -> np.ndarray:
        return (np.asarray(rows, dtype=np.float64) - self.mu) / self.sigma

    def predict(self, rows: np.ndarray) -> np.ndarray:
        """Per-row class labels: 0 for pair[0], 1 for pair[1]."""
        return self.model.predict(self.transform(rows))

    def majority_user(self, rows: np.ndarray) -> str | None:
        """Majority answer over rows; an exact tie yields no answer."""
        labels = self.predict(rows)
        ones = int(labels.sum())
        zeros = labels.size - ones
        if ones == zeros:
            return None
        return self.pair[1] if ones > zeros else self.pair[0]


def fit_pair_pipeline(
    train_i: np.ndarray,
    train_j: np.ndarray,
    cv: CVConfig,
    pair: tuple[str, str] = ("0", "1"),
) -> ScalerModelPipeline | Discarded:
    """Scale, tune, and fit one user-pair model; discard weak cross-validators.

    The scaler stores the pooled training mean/std (a constant column gets
    sigma 1 so scaling is a no-op there). Pipelines scoring <= 60% in CV are
    discarded.
    """
    train_i = np.asarray(train_i, dtype=np.float64)
    train_j = np.asarray(train_j, dtype=np.float64)
    if train_i.size == 0 or train_j.size == 0:
        raise EmptyDataError("both users need non-empty training rows")
    X = np.vstack([train_i, train_j])
    y = np.concatenate([np.zeros(train_i.shape[0]), np.ones(train_j.shape[0])]).astype(np.uint8)
    mu = X.mean(axis=0)
    sigma = X.std(axis=0)
    sigma = np.where(sigma == 0.0, 1.0, sigma)
    X_scaled = (X - mu) / sigma
    best_point, best_score = grid_search(X_scaled, y, cv)
    if best_score <= CV_DISCARD_THRESHOLD:
        return Discarded(pair=pair, cv_score=best_score)
    model = train_forest(X_scaled, y, ForestParams(**best_point), seed=cv.seed)
    return ScalerModelPipeline(pair=pair, mu=mu, sigma=sigma, model=model, cv_score=best_score)


def decision_grid(
    predict_fn,
    bounds: tuple[tuple[float, float], tuple[float, float]],
    resolution: int = 100,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Class labels over a 2-D lattice, for decision-region plots.

    Returns (labels[resolution, resolution], xs, ys) with labels[i, j] the
    prediction at (xs[j], ys[i]).
    """
    (x_lo, x_hi), (y_lo, y_hi) = bounds
    xs = np.linspace(x_lo, x_hi, resolution)
    ys = np.linspace(y_lo, y_hi, resolution)
    gx, gy = np.meshgrid(xs, ys)
    points = np.column_stack([gx.ravel(), gy.ravel()])
    labels = np.asarray(predict_fn(points))
    return labels.reshape(resolution, resolution), xs, ys
