"""Enrollment: building, extending, and persisting the pairwise model library.

A library holds one scaler+forest pipeline per unordered user pair (n-choose-2
slots; weak cross-validators are recorded as discarded) plus each user's
training feature rows, which the hypothesis-testing confirmation path needs
at prediction time. The on-disk format is a single versioned JSON document
with per-pipeline checksums.
"""

from __future__ import annotations

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import CorruptFileError, DuplicateUserError, VersionMismatchError
from .features import FeatureMatrix
from .learn import (
    CVConfig,
    DecisionTree,
    Discarded,
    ForestParams,
    RandomForest,
    ScalerModelPipeline,
    fit_pair_pipeline,
)

FORMAT_VERSION = 1


def pair_key(user_a: str, user_b: str) -> tuple[str, str]:
    """Canonical unordered pair key (model m_ij is m_ji)."""
    if user_a == user_b:
        raise ValueError("a pair needs two distinct users")
    return (user_a, user_b) if user_a < user_b else (user_b, user_a)


def pair_seed(base_seed: int, user_a: str, user_b: str) -> int:
    """Deterministic per-pair seed, independent of enrollment order."""
    key = "|".join(pair_key(user_a, user_b)).encode()
    digest = hashlib.sha256(key + str(base_seed).encode()).digest()
    return int.from_bytes(digest[:8], "big") % (2**63)


@dataclass
class ModelLibrary:
    users: list[str]
    selected_features: tuple[str, ...]
    pipelines: dict[tuple[str, str], ScalerModelPipeline]
    discarded: dict[tuple[str, str], Discarded]
    training_store: dict[str, np.ndarray]
    format_version: int = FORMAT_VERSION

    @property
    def n_users(self) -> int:
        return len(self.users)

    @property
    def n_models(self) -> int:
        return len(self.pipelines)

    def pipeline_for(self, user_a: str, user_b: str) -> ScalerModelPipeline | None:
        return self.pipelines.get(pair_key(user_a, user_b))

    def pairs_of(self, user: str) -> list[tuple[str, str]]:
        return [pair_key(user, other) for other in self.users if other != user]


def _fit_one(args) -> tuple[tuple[str, str], ScalerModelPipeline | Discarded]:
    pair, rows_a, rows_b, cv = args
    result = fit_pair_pipeline(rows_a, rows_b, cv, pair=pair)
    return pair, result


def enroll_all(train: FeatureMatrix, cv: CVConfig, jobs: int = 1) -> ModelLibrary:
    """Fit every unordered user pair and store the training rows.

    Per-pair seeds derive from (cv.seed, pair), so results are independent of
    fitting order and of the parallelism degree.
    """
    users = sorted(train.users())
    if len(users) < 2:
        raise ValueError("enrollment needs at least 2 users")
    store = {u: np.ascontiguousarray(train.rows_for_user(u)) for u in users}
    tasks = []
    for i, ua in enumerate(users):
        for ub in users[i + 1 :]:
            pair = pair_key(ua, ub)
            pair_cv = CVConfig(k=cv.k, grid=cv.grid, seed=pair_seed(cv.seed, ua, ub))
            tasks.append((pair, store[pair[0]], store[pair[1]], pair_cv))

    pipelines: dict[tuple[str, str], ScalerModelPipeline] = {}
    discarded: dict[tuple[str, str], Discarded] = {}
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_one, tasks, chunksize=4))
    else:
        results = [_fit_one(t) for t in tasks]
    for pair, result in results:
        if isinstance(result, Discarded):
            discarded[pair] = result
        else:
            pipelines[pair] = result
    return ModelLibrary(
        users=users,
        selected_features=tuple(train.feature_names),
        pipelines=pipelines,
        discarded=discarded,
        training_store=store,
    )


def enroll_user(library: ModelLibrary, new_user_train: FeatureMatrix, cv: CVConfig, jobs: int = 1) -> ModelLibrary:
    """Add one user: exactly n new pair models, existing pipelines untouched."""
    new_users = new_user_train.users()
    if len(new_users) != 1:
        raise ValueError("enroll_user expects the training rows of exactly one user")
    user = new_users[0]
    if user in library.users:
        raise DuplicateUserError(f"user {user!r} is already enrolled")
    if tuple(new_user_train.feature_names) != tuple(library.selected_features):
        raise ValueError("new user's features do not match the library's feature panel")
    rows = np.ascontiguousarray(new_user_train.rows_for_user(user))

    tasks = []
    for other in library.users:
        pair = pair_key(user, other)
        pair_cv = CVConfig(k=cv.k, grid=cv.grid, seed=pair_seed(cv.seed, user, other))
        rows_a = rows if pair[0] == user else library.training_store[pair[0]]
        rows_b = rows if pair[1] == user else library.training_store[pair[1]]
        tasks.append((pair, rows_a, rows_b, pair_cv))
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_fit_one, tasks, chunksize=4))
    else:
        results = [_fit_one(t) for t in tasks]

    pipelines = dict(library.pipelines)
    discarded = dict(library.discarded)
    for pair, result in results:
        if isinstance(result, Discarded):
            discarded[pair] = result
        else:
            pipelines[pair] = result
    store = dict(library.training_store)
    store[user] = rows
    return ModelLibrary(
        users=sorted(library.users + [user]),
        selected_features=library.selected_features,
        pipelines=pipelines,
        discarded=discarded,
        training_store=store,
    )


# -- persistence -----------------------------------------------------------------


def _tree_to_dict(tree: DecisionTree) -> dict:
    return {
        "feature": tree.feature.tolist(),
        "threshold": tree.threshold.tolist(),
        "left": tree.left.tolist(),
        "right": tree.right.tolist(),
        "counts": tree.counts.tolist(),
    }


def _tree_from_dict(d: dict) -> DecisionTree:
    return DecisionTree(
        feature=np.asarray(d["feature"], dtype=np.int64),
        threshold=np.asarray(d["threshold"], dtype=np.float64),
        left=np.asarray(d["left"], dtype=np.int64),
        right=np.asarray(d["right"], dtype=np.int64),
        counts=np.asarray(d["counts"], dtype=np.int64),
    )


def _params_to_dict(params: ForestParams) -> dict:
    return {
        "n_trees": params.n_trees,
        "max_depth": params.max_depth,
        "min_samples_split": params.min_samples_split,
        "min_samples_leaf": params.min_samples_leaf,
        "features_per_split": params.features_per_split,
    }


def _pipeline_to_dict(pipe: ScalerModelPipeline) -> dict:
    return {
        "pair": list(pipe.pair),
        "mu": pipe.mu.tolist(),
        "sigma": pipe.sigma.tolist(),
        "cv_score": pipe.cv_score,
        "model": {
            "params": _params_to_dict(pipe.model.params),
            "seed": pipe.model.seed,
            "importances": pipe.model.importances.tolist(),
            "trees": [_tree_to_dict(t) for t in pipe.model.trees],
        },
    }


def _pipeline_from_dict(d: dict) -> ScalerModelPipeline:
    model = d["model"]
    forest = RandomForest(
        trees=[_tree_from_dict(t) for t in model["trees"]],
        params=ForestParams(**model["params"]),
        seed=model["seed"],
        importances=np.asarray(model["importances"], dtype=np.float64),
    )
    return ScalerModelPipeline(
        pair=tuple(d["pair"]),
        mu=np.asarray(d["mu"], dtype=np.float64),
        sigma=np.asarray(d["sigma"], dtype=np.float64),
        model=forest,
        cv_score=float(d["cv_score"]),
    )


def _checksum(payload: dict) -> str:
    canon = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


def save(library: ModelLibrary, path: str) -> None:
    """Write the library as one versioned JSON document with checksums."""
    doc = {
        "format_version": library.format_version,
        "users": list(library.users),
        "selected_features": list(library.selected_features),
        "pipelines": {},
        "discarded": [
            {"pair": list(pair), "cv_score": disc.cv_score}
            for pair, disc in sorted(library.discarded.items())
        ],
        "training_store": {u: rows.tolist() for u, rows in library.training_store.items()},
    }
    for pair, pipe in sorted(library.pipelines.items()):
        payload = _pipeline_to_dict(pipe)
        doc["pipelines"]["|".join(pair)] = {"payload": payload, "checksum": _checksum(payload)}
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="ascii") as fh:
        json.dump(doc, fh, sort_keys=True)
        fh.write("\n")


def load(path: str) -> ModelLibrary:
    """Read a library; checksum or structural damage raises CorruptFileError."""
    try:
        with open(path, "r", encoding="ascii") as fh:
            doc = json.load(fh)
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise CorruptFileError(f"{path}: not a library file ({exc})")
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise VersionMismatchError(f"{path}: format_version {version!r}, supported {FORMAT_VERSION}")
    try:
        pipelines: dict[tuple[str, str], ScalerModelPipeline] = {}
        for key, entry in doc["pipelines"].items():
            if _checksum(entry["payload"]) != entry["checksum"]:
                raise CorruptFileError(f"{path}: checksum mismatch for pair {key}")
        for key, entry in doc["pipelines"].items():
            pipe = _pipeline_from_dict(entry["payload"])
            pipelines[tuple(pipe.pair)] = pipe
        discarded = {
            tuple(d["pair"]): Discarded(pair=tuple(d["pair"]), cv_score=float(d["cv_score"]))
            for d in doc["discarded"]
        }
        store = {
            user: np.asarray(rows, dtype=np.float64)
            for user, rows in doc["training_store"].items()
        }
        return ModelLibrary(
            users=list(doc["users"]),
            selected_features=tuple(doc["selected_features"]),
            pipelines=pipelines,
            discarded=discarded,
            training_store=store,
            format_version=version,
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise CorruptFileError(f"{path}: malformed library document ({exc})")
