"""User confirmation, identification, fusion, metrics, and evaluation trials.

Confirmation answers "are you user i?" by polling that user's pair models
(UCA.ML) or pairwise equality-of-means tests against the stored training
rows (UCA.HT); the favourable-vote fraction eta decides. Identification runs
a confirmation trial per enrolled user and takes the unique argmax of the
resulting prediction vector, optionally after a weighted fusion of several
algorithms' vectors.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadWeightsError,
    EmptyLibraryError,
    EmptyTestDataError,
    LengthMismatchError,
    UnknownUserError,
)
from .features import FeatureMatrix, SplitSpec, grouped_split
from .httest import hotelling_t2
from .learn import CVConfig
from .library import ModelLibrary, enroll_all

DEFAULT_CONFIRM_THRESHOLD = 50.0
DEFAULT_IDENTIFY_THRESHOLD = 55.0
DEFAULT_HT_ALPHA = 0.001
DEFAULT_WEIGHTS = (0.3, 0.7)  # (HT, ML)


@dataclass(frozen=True)
class ConfirmationOutcome:
    claimed_user: str
    v: int
    n_comparisons: int
    eta: float
    eta_t: float
    confirmed: bool


@dataclass(frozen=True)
class PredictionVector:
    """Per-trial-user favourable counts (or fused scores), aligned with users."""

    users: tuple[str, ...]
    scores: np.ndarray

    def __post_init__(self) -> None:
        s = np.asarray(self.scores, dtype=np.float64)
        if s.shape != (len(self.users),):
            raise ValueError("scores must align with users")
        object.__setattr__(self, "scores", s)
        object.__setattr__(self, "users", tuple(self.users))

    @property
    def n_users(self) -> int:
        return len(self.users)


class Tally(enum.Enum):
    TRUE_POSITIVE = "true_positive"
    FALSE_POSITIVE = "false_positive"
    NOT_IDENTIFIED = "not_identified"


@dataclass(frozen=True)
class IdentificationOutcome:
    identified_user: str | None
    confidence: float  # 100 * max(V) / (n - 1)
    true_user: str | None = None
    tally: Tally | None = None


@dataclass(frozen=True)
class FusionWeights:
    w: tuple[float, ...]

    def __post_init__(self) -> None:
        w = tuple(float(x) for x in self.w)
        if not w:
            raise BadWeightsError("need at least one weight")
        if any(x < 0.0 or x > 1.0 for x in w):
            raise BadWeightsError("weights must lie in [0, 1]")
        if abs(sum(w) - 1.0) > 1e-9:
            raise BadWeightsError(f"weights must sum to 1, got {sum(w)}")
        object.__setattr__(self, "w", w)


def _check_probe(library: ModelLibrary, test_rows) -> np.ndarray:
    rows = np.asarray(test_rows, dtype=np.float64)
    if rows.ndim == 1:
        rows = rows[None, :]
    if rows.size == 0:
        raise EmptyTestDataError("probe has no feature rows")
    if rows.shape[1] != len(library.selected_features):
        raise ValueError("probe columns do not match the library's feature panel")
    return rows


def _ht_p_values(library: ModelLibrary, rows: np.ndarray, users=None) -> dict[str, float]:
    """p-value of the probe against each user's training rows (computed once)."""
    users = users if users is not None else library.users
    return {u: hotelling_t2(rows, library.training_store[u]).p_value for u in users}


def _ht_vote(p_i: float, p_j: float, alpha: float) -> int:
    """-1 no vote, 0 first user, 1 second user (strictly higher p wins)."""
    if p_i <= alpha and p_j <= alpha:
        return -1
    if p_i > p_j:
        return 0
    if p_j > p_i:
        return 1
    return -1  # exact tie: conservative no-vote


def confirm_ht(
    claimed_user: str,
    test_rows,
    library: ModelLibrary,
    alpha: float = DEFAULT_HT_ALPHA,
    eta_t: float = DEFAULT_CONFIRM_THRESHOLD,
) -> ConfirmationOutcome:
    """Hypothesis-testing confirmation block over the claimed user's pairs."""
    if claimed_user not in library.users:
        raise UnknownUserError(f"user {claimed_user!r} is not enrolled")
    rows = _check_probe(library, test_rows)
    p = _ht_p_values(library, rows)
    votes = 0
    others = [u for u in library.users if u != claimed_user]
    for other in others:
        vote = _ht_vote(p[claimed_user], p[other], alpha)
        if vote == 0:
            votes += 1
    n_comparisons = len(others)
    eta = 100.0 * votes / n_comparisons if n_comparisons else 0.0
    return ConfirmationOutcome(
        claimed_user=claimed_user,
        v=votes,
        n_comparisons=n_comparisons,
        eta=eta,
        eta_t=eta_t,
        confirmed=eta >= eta_t,
    )


def confirm_ml(
    claimed_user: str,
    test_rows,
    library: ModelLibrary,
    eta_t: float = DEFAULT_CONFIRM_THRESHOLD,
) -> ConfirmationOutcome:
    """Model-library confirmation block over the claimed user's pair models.

    Discarded pair models cast no vote and shrink the eta denominator.
    """
    if claimed_user not in library.users:
        raise UnknownUserError(f"user {claimed_user!r} is not enrolled")
    rows = _check_probe(library, test_rows)
    votes = 0
    available = 0
    for other in library.users:
        if other == claimed_user:
            continue
        pipe = library.pipeline_for(claimed_user, other)
        if pipe is None:
            continue
        available += 1
        if pipe.majority_user(rows) == claimed_user:
            votes += 1
    eta = 100.0 * votes / available if available else 0.0
    return ConfirmationOutcome(
        claimed_user=claimed_user,
        v=votes,
        n_comparisons=available,
        eta=eta,
        eta_t=eta_t,
        confirmed=eta >= eta_t,
    )


def identify(
    test_rows,
    library: ModelLibrary,
    block: str,
    alpha: float = DEFAULT_HT_ALPHA,
) -> PredictionVector:
    """Favourable-vote counts from one confirmation trial per enrolled user.

    Each pair is evaluated once and its answer credited to both trial users,
    which is exactly the per-user confirmation count.
    """
    if not library.users:
        raise EmptyLibraryError("library has no enrolled users")
    if block not in ("ht", "ml"):
        raise ValueError("block must be 'ht' or 'ml'")
    rows = _check_probe(library, test_rows)
    users = library.users
    index = {u: k for k, u in enumerate(users)}
    scores = np.zeros(len(users))
    if block == "ht":
        p = _ht_p_values(library, rows)
        for i, ua in enumerate(users):
            for ub in users[i + 1 :]:
                vote = _ht_vote(p[ua], p[ub], alpha)
                if vote == 0:
                    scores[index[ua]] += 1
                elif vote == 1:
                    scores[index[ub]] += 1
    else:
        for i, ua in enumerate(users):
            for ub in users[i + 1 :]:
                pipe = library.pipeline_for(ua, ub)
                if pipe is None:
                    continue
                answer = pipe.majority_user(rows)
                if answer is not None:
                    scores[index[answer]] += 1
    return PredictionVector(users=tuple(users), scores=scores)


def fuse(vectors: list[PredictionVector], weights: FusionWeights) -> PredictionVector:
    """Weighted elementwise sum of prediction vectors from several algorithms."""
    if len(vectors) != len(weights.w):
        raise BadWeightsError(f"{len(weights.w)} weights for {len(vectors)} vectors")
    if not vectors:
        raise LengthMismatchError("nothing to fuse")
    first = vectors[0]
    for v in vectors[1:]:
        if v.n_users != first.n_users:
            raise LengthMismatchError("prediction vectors differ in length")
        if v.users != first.users:
            raise LengthMismatchError("prediction vectors are over different users")
    fused = np.zeros(first.n_users)
    for w, v in zip(weights.w, vectors):
        fused += w * v.scores
    return PredictionVector(users=first.users, scores=fused)


def decide_identity(
    vector: PredictionVector,
    eta_t: float = DEFAULT_IDENTIFY_THRESHOLD,
    true_user: str | None = None,
) -> IdentificationOutcome:
    """Unique argmax of V above the confidence threshold, else no identification."""
    scores = vector.scores
    if scores.size == 0:
        raise ValueError("empty prediction vector")
    top = float(scores.max())
    n = scores.size
    confidence = 100.0 * top / (n - 1) if n > 1 else 100.0 * top
    winners = np.flatnonzero(scores == top)
    identified: str | None = None
    if winners.size == 1 and top > 0.0 and confidence >= eta_t:
        identified = vector.users[winners[0]]
    if true_user is None:
        tally = Tally.NOT_IDENTIFIED if identified is None else None
    elif identified is None:
        tally = Tally.NOT_IDENTIFIED
    elif identified == true_user:
        tally = Tally.TRUE_POSITIVE
    else:
        tally = Tally.FALSE_POSITIVE
    return IdentificationOutcome(
        identified_user=identified,
        confidence=confidence,
        true_user=true_user,
        tally=tally,
    )


# -- metrics ---------------------------------------------------------------------


@dataclass(frozen=True)
class Metrics:
    n_confirmations: int = 0
    confirmed: int = 0
    tcr: float | None = None
    n_identifications: int = 0
    t: int = 0
    f: int = 0
    h: int = 0
    precision: float | None = None
    accuracy: float | None = None


def metrics(
    confirmations: list[ConfirmationOutcome] = (),
    identifications: list[IdentificationOutcome] = (),
) -> Metrics:
    """True-confirmation rate, precision, and accuracy from trial outcomes.

    Precision is reported as absent (None) when no identifications were made.
    """
    confirmations = list(confirmations)
    identifications = list(identifications)
    n_conf = len(confirmations)
    c = sum(1 for o in confirmations if o.confirmed)
    tcr = 100.0 * c / n_conf if n_conf else None
    n_id = len(identifications)
    t = sum(1 for o in identifications if o.tally is Tally.TRUE_POSITIVE)
    f = sum(1 for o in identifications if o.tally is Tally.FALSE_POSITIVE)
    h = sum(1 for o in identifications if o.tally is Tally.NOT_IDENTIFIED)
    precision = 100.0 * t / (t + f) if (t + f) > 0 else None
    accuracy = 100.0 * t / n_id if n_id else None
    return Metrics(
        n_confirmations=n_conf,
        confirmed=c,
        tcr=tcr,
        n_identifications=n_id,
        t=t,
        f=f,
        h=h,
        precision=precision,
        accuracy=accuracy,
    )


def rank_statistics(
    vectors: list[PredictionVector],
    true_users: list[str],
    ks: tuple[int, ...] = (1, 2, 3),
) -> dict[int, float]:
    """Fraction of trials whose true user ranks within the top k of V.

    Ties count pessimistically: the true user lands in the top k only when
    the users strictly above it plus its whole tied block fit within k.
    """
    if len(vectors) != len(true_users):
        raise LengthMismatchError("one true user per prediction vector")
    if not vectors:
        return {k: 0.0 for k in ks}
    hits = {k: 0 for k in ks}
    for vector, true_user in zip(vectors, true_users):
        if true_user not in vector.users:
            raise UnknownUserError(f"true user {true_user!r} not in the vector")
        own = vector.scores[vector.users.index(true_user)]
        above = int(np.sum(vector.scores > own))
        tied = int(np.sum(vector.scores == own))  # includes the true user
        worst_rank = above + tied
        for k in ks:
            if worst_rank <= k:
                hits[k] += 1
    return {k: hits[k] / len(vectors) for k in ks}


# -- shuffle-trial evaluation ------------------------------------------------------


@dataclass(frozen=True)
class EvalConfig:
    n_trials: int = 66
    seed: int = 0
    train_fraction: float = 0.6
    cv: CVConfig = field(default_factory=CVConfig)
    eta_confirm: float = DEFAULT_CONFIRM_THRESHOLD
    eta_identify: float = DEFAULT_IDENTIFY_THRESHOLD
    weights: tuple[float, float] = DEFAULT_WEIGHTS
    ht_alpha: float = DEFAULT_HT_ALPHA
    jobs: int = 1


@dataclass(frozen=True)
class TrialResult:
    trial: int
    split_seed: int
    tcr_ht: float
    tcr_ml: float
    tallies: dict[str, tuple[int, int, int]]  # channel -> (t, f, h)
    precision: dict[str, float | None]
    accuracy: dict[str, float | None]
    rank_fractions: dict[int, float]
    n_users: int
    n_models: int


@dataclass(frozen=True)
class EvalReport:
    config: EvalConfig
    trials: list[TrialResult]

    def mean_2std(self, values: list[float]) -> tuple[float, float]:
        arr = np.asarray(values, dtype=np.float64)
        return float(arr.mean()), float(2.0 * arr.std())

    def summary(self) -> dict:
        tcr_ht = [t.tcr_ht for t in self.trials]
        tcr_ml = [t.tcr_ml for t in self.trials]
        out: dict = {
            "n_trials": len(self.trials),
            "tcr_ht": self.mean_2std(tcr_ht),
            "tcr_ml": self.mean_2std(tcr_ml),
        }
        for channel in ("ht", "ml", "fused"):
            precision = [t.precision[channel] for t in self.trials if t.precision[channel] is not None]
            accuracy = [t.accuracy[channel] for t in self.trials if t.accuracy[channel] is not None]
            out[f"precision_{channel}"] = self.mean_2std(precision) if precision else None
            out[f"accuracy_{channel}"] = self.mean_2std(accuracy) if accuracy else None
        for k in (1, 2, 3):
            fractions = [100.0 * t.rank_fractions[k] for t in self.trials]
            out[f"top{k}_percent_range"] = (min(fractions), max(fractions))
            out[f"top{k}_percent_mean"] = float(np.mean(fractions))
        return out


def _trial_seed(base: int, trial: int) -> int:
    return int(np.random.SeedSequence([base, trial]).generate_state(1)[0])


def run_trial(matrix: FeatureMatrix, config: EvalConfig, trial: int) -> TrialResult:
    """One shuffle trial: split, enroll, confirm all users, identify all users."""
    split_seed = _trial_seed(config.seed, trial)
    train, test = grouped_split(matrix, SplitSpec(train_fraction=config.train_fraction, seed=split_seed))
    cv = CVConfig(k=config.cv.k, grid=config.cv.grid, seed=_trial_seed(split_seed, 1))
    library = enroll_all(train, cv, jobs=config.jobs)

    confirmations_ht, confirmations_ml = [], []
    identifications: dict[str, list[IdentificationOutcome]] = {"ht": [], "ml": [], "fused": []}
    fused_vectors: list[PredictionVector] = []
    true_users: list[str] = []
    weights = FusionWeights(config.weights)
    for user in library.users:
        probe = test.rows_for_user(user)
        if probe.shape[0] == 0:
            continue
        confirmations_ht.append(
            confirm_ht(user, probe, library, alpha=config.ht_alpha, eta_t=config.eta_confirm)
        )
        confirmations_ml.append(confirm_ml(user, probe, library, eta_t=config.eta_confirm))
        v_ht = identify(probe, library, "ht", alpha=config.ht_alpha)
        v_ml = identify(probe, library, "ml")
        v_fused = fuse([v_ht, v_ml], weights)
        for channel, vector in (("ht", v_ht), ("ml", v_ml), ("fused", v_fused)):
            identifications[channel].append(
                decide_identity(vector, eta_t=config.eta_identify, true_user=user)
            )
        fused_vectors.append(v_fused)
        true_users.append(user)

    tcr_ht = metrics(confirmations=confirmations_ht).tcr or 0.0
    tcr_ml = metrics(confirmations=confirmations_ml).tcr or 0.0
    tallies, precision, accuracy = {}, {}, {}
    for channel in ("ht", "ml", "fused"):
        m = metrics(identifications=identifications[channel])
        tallies[channel] = (m.t, m.f, m.h)
        precision[channel] = m.precision
        accuracy[channel] = m.accuracy
    return TrialResult(
        trial=trial,
        split_seed=split_seed,
        tcr_ht=tcr_ht,
        tcr_ml=tcr_ml,
        tallies=tallies,
        precision=precision,
        accuracy=accuracy,
        rank_fractions=rank_statistics(fused_vectors, true_users),
        n_users=library.n_users,
        n_models=library.n_models,
    )


def shuffle_trials(matrix: FeatureMatrix, config: EvalConfig) -> EvalReport:
    """Repeat the split/enroll/authenticate cycle over reshuffled splits."""
    trials = [run_trial(matrix, config, t) for t in range(config.n_trials)]
    return EvalReport(config=config, trials=trials)
