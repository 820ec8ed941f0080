"""Evaluation protocols.

Scenario A works inside the training part with stratified cross-validation;
scenario B trains on the training part and scores the labelled test sessions.
Decisions are made per action, per set of ``k`` consecutive actions (scores
averaged), or per whole session.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
import pandas as pd

from .features import CATEGORICAL, FEATURE_NAMES
from .forest import ForestModel, build_user_dataset, derive_seed, fuse_scores, train_forest
from .metrics import ScoreSet, compute_roc, rates_at
from .pipeline import feature_matrix, feature_table, per_user_matrices, segment_sessions

log = logging.getLogger(__name__)

DECISION_THRESHOLD = 0.5


class InsufficientData(ValueError):
    pass


class NoModelForUser(KeyError):
    pass


class EmptyTestSet(ValueError):
    pass


@dataclass(frozen=True)
class Protocol:
    name: str  # "action", "set" or "session"
    k: int = 1

    @classmethod
    def parse(cls, text: str) -> "Protocol":
        text = text.strip().lower()
        if text in ("action", "session"):
            return cls(text)
        if text.startswith("set:"):
            k = int(text[4:])
            if k < 1:
                raise ValueError("set size must be >= 1")
            return cls("set", k)
        raise ValueError(f"unknown protocol {text!r}; use action, set:<k> or session")

    def __str__(self):
        return f"set:{self.k}" if self.name == "set" else self.name


@dataclass(frozen=True)
class EvalReport:
    scope: str  # "user", "global", "mean" or "std"
    scenario: str
    protocol: str
    acc: float
    auc: float
    eer: float
    fnr: float
    fpr: float
    n_positive: int
    n_negative: int
    user: int | None = None
    eer_threshold: float | None = None

    def as_dict(self):
        return asdict(self)


def evaluate_scores(scores: ScoreSet, *, scope, scenario, protocol, user=None):
    """Report for one score set; returns (report, roc)."""
    roc = compute_roc(scores)
    r = rates_at(scores, DECISION_THRESHOLD)
    report = EvalReport(
        scope=scope,
        scenario=scenario,
        protocol=str(protocol),
        acc=r["acc"],
        auc=roc.auc,
        eer=roc.eer,
        fnr=r["fnr"],
        fpr=r["fpr"],
        n_positive=int(scores.positives.size),
        n_negative=int(scores.negatives.size),
        user=user,
        eer_threshold=roc.eer_threshold,
    )
    return report, roc


def summarize(reports, scenario, protocol):
    """Mean and standard deviation rows over per-user reports."""
    out = []
    for scope, fn in (("mean", np.mean), ("std", np.std)):
        out.append(
            EvalReport(
                scope=scope,
                scenario=scenario,
                protocol=str(protocol),
                acc=float(fn([r.acc for r in reports])),
                auc=float(fn([r.auc for r in reports])),
                eer=float(fn([r.eer for r in reports])),
                fnr=float(fn([r.fnr for r in reports])),
                fpr=float(fn([r.fpr for r in reports])),
                n_positive=sum(r.n_positive for r in reports),
                n_negative=sum(r.n_negative for r in reports),
            )
        )
    return out


@dataclass
class UserTable:
    """Per-user reports followed by mean and std rows."""

    users: list[EvalReport]
    mean: EvalReport
    std: EvalReport
    rocs: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def rows(self):
        return [*self.users, self.mean, self.std]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([r.as_dict() for r in self.rows])


def _windows(scores, k):
    """Mean of each complete run of k consecutive scores."""
    scores = np.asarray(scores, dtype=float)
    m = (len(scores) // k) * k
    if m == 0:
        return np.empty(0)
    return scores[:m].reshape(-1, k).mean(axis=1)


# ---------------------------------------------------------------------------
# scenario A


def stratified_folds(y, folds: int, seed: int) -> np.ndarray:
    """Fold id per row; each class is shuffled and dealt round-robin."""
    rng = np.random.default_rng(seed)
    assign = np.empty(len(y), dtype=np.int64)
    for cls in np.unique(y):
        idx = np.nonzero(y == cls)[0]
        assign[rng.permutation(idx)] = np.arange(len(idx)) % folds
    return assign


@dataclass
class CVScores:
    """Held-out scores per user and fold, each stream in original row order."""

    folds: int
    seed: int
    positives: dict  # user -> list of arrays, one per fold
    negatives: dict
    assignment: dict  # user -> fold id per dataset row

    def pooled(self, user=None) -> ScoreSet:
        users = [user] if user is not None else sorted(self.positives)
        pos = np.concatenate([np.concatenate(self.positives[u]) for u in users])
        neg = np.concatenate([np.concatenate(self.negatives[u]) for u in users])
        return ScoreSet(pos, neg)

    def fused(self, k: int) -> ScoreSet:
        """Set-of-k scores pooled over all users, windows kept inside a fold."""
        pos, neg = [], []
        for u in sorted(self.positives):
            pos.extend(_windows(s, k) for s in self.positives[u])
            neg.extend(_windows(s, k) for s in self.negatives[u])
        return ScoreSet(np.concatenate(pos), np.concatenate(neg))


def cross_validated_scores(
    train_df: pd.DataFrame, *, folds=10, seed=0, num_trees=100, n_jobs=1, proba="vote"
) -> CVScores:
    mats = per_user_matrices(train_df)
    positives, negatives, assignment = {}, {}, {}
    for user in sorted(mats):
        data = build_user_dataset(mats, user, seed)
        n_min = min(int(data.y.sum()), int(len(data.y) - data.y.sum()))
        if n_min < folds:
            raise InsufficientData(f"user {user}: {n_min} rows per class, need at least {folds}")
        fold_of = stratified_folds(data.y, folds, derive_seed(seed, user, 1))
        positives[user], negatives[user] = [], []
        for f in range(folds):
            test = fold_of == f
            train = ~test
            sub = type(data)(user, data.X[train], data.y[train], data.source_user[train], data.source_row[train])
            model = train_forest(
                sub, FEATURE_NAMES, CATEGORICAL, num_trees=num_trees,
                seed=derive_seed(seed, f), n_jobs=n_jobs, proba=proba,
            )
            # rows are stored genuine first, impostors grouped per user in row order
            p = model.predict_proba(data.X[test])
            yt = data.y[test]
            positives[user].append(p[yt == 1])
            negatives[user].append(p[yt == 0])
        assignment[user] = fold_of
        log.info("scenario A: user %s done", user)
    return CVScores(folds, seed, positives, negatives, assignment)


def _user_table(cv: CVScores, scenario, protocol):
    users, rocs = [], {}
    for u in sorted(cv.positives):
        rep, roc = evaluate_scores(cv.pooled(u), scope="user", scenario=scenario, protocol=protocol, user=u)
        users.append(rep)
        rocs[u] = roc
    mean, std = summarize(users, scenario, protocol)
    glob, rocs["global"] = evaluate_scores(cv.pooled(), scope="global", scenario=scenario, protocol=protocol)
    return UserTable(users, mean, std, rocs, {"global": glob, "fold_assignment": cv.assignment})


def scenario_a_action(train_df, *, folds=10, seed=0, num_trees=100, n_jobs=1, proba="vote", cv=None):
    cv = cv or cross_validated_scores(
        train_df, folds=folds, seed=seed, num_trees=num_trees, n_jobs=n_jobs, proba=proba
    )
    table = _user_table(cv, "A", "action")
    table.extra["cv"] = cv
    return table


def scenario_a_by_type(train_df, kind, *, folds=10, seed=0, num_trees=100, n_jobs=1, proba="vote"):
    kind = getattr(kind, "value", kind)
    sub = train_df[train_df["type_of_action"] == kind]
    for u in sorted(train_df["user_id"].unique()):
        n = int((sub["user_id"] == u).sum())
        if n < folds:
            raise InsufficientData(f"user {u}: {n} {kind} actions, need at least {folds}")
    return scenario_a_action(sub, folds=folds, seed=seed, num_trees=num_trees, n_jobs=n_jobs, proba=proba)


def scenario_a_action_set(train_df=None, k_range=range(1, 21), *, cv=None, folds=10, seed=0, num_trees=100, n_jobs=1):
    """Global-threshold AUC and EER for sets of k actions: list of (k, auc, eer)."""
    if cv is None:
        cv = cross_validated_scores(train_df, folds=folds, seed=seed, num_trees=num_trees, n_jobs=n_jobs)
    out = []
    for k in k_range:
        scores = cv.fused(k)
        if scores.positives.size == 0 or scores.negatives.size == 0:
            raise InsufficientData(f"no complete sets of {k} actions")
        roc = compute_roc(scores)
        out.append((k, roc.auc, roc.eer))
    return out


# ---------------------------------------------------------------------------
# scenario B


def train_user_models(train_df, *, seed=0, num_trees=100, n_jobs=1, proba="vote") -> dict[int, ForestModel]:
    mats = per_user_matrices(train_df)
    models = {}
    for user in sorted(mats):
        data = build_user_dataset(mats, user, seed)
        models[user] = train_forest(data, FEATURE_NAMES, CATEGORICAL, num_trees=num_trees, seed=seed, n_jobs=n_jobs, proba=proba)
    return models


def score_test_actions(models, test_df) -> np.ndarray:
    """Genuine probability of every test action under its claimed user's model."""
    scores = np.empty(len(test_df))
    X = feature_matrix(test_df)
    users = test_df["user_id"].to_numpy()
    for u in np.unique(users):
        if int(u) not in models:
            raise NoModelForUser(f"no model for claimed user {u}")
        mask = users == u
        scores[mask] = models[int(u)].predict_proba(X[mask])
    return scores


@dataclass
class ScenarioBResult:
    protocol: str
    report: EvalReport
    roc: object
    table: UserTable | None = None
    session_scores: pd.DataFrame | None = None


def scenario_b(train_df, test_df, protocol="session", *, seed=0, num_trees=100, n_jobs=1, proba="vote", models=None):
    protocol = protocol if isinstance(protocol, Protocol) else Protocol.parse(protocol)
    if len(test_df) == 0:
        raise EmptyTestSet("test feature table is empty")
    if models is None:
        models = train_user_models(train_df, seed=seed, num_trees=num_trees, n_jobs=n_jobs, proba=proba)
    df = test_df[["user_id", "session_id", "genuine"]].copy()
    df["score"] = score_test_actions(models, test_df)
    genuine = df["genuine"].to_numpy(dtype=bool)

    if protocol.name == "action":
        users, rocs = [], {}
        for u, g in df.groupby("user_id", sort=True):
            gm = g["genuine"].to_numpy(dtype=bool)
            s = ScoreSet(g["score"].to_numpy()[gm], g["score"].to_numpy()[~gm])
            if s.positives.size == 0 or s.negatives.size == 0:
                log.warning("user %s lacks positive or negative test actions; skipped in per-user table", u)
                continue
            rep, rocs[int(u)] = evaluate_scores(s, scope="user", scenario="B", protocol=protocol, user=int(u))
            users.append(rep)
        mean, std = summarize(users, "B", protocol)
        pooled = ScoreSet(df["score"].to_numpy()[genuine], df["score"].to_numpy()[~genuine])
        rep, roc = evaluate_scores(pooled, scope="global", scenario="B", protocol=protocol)
        return ScenarioBResult(str(protocol), rep, roc, UserTable(users, mean, std, rocs))

    rows = []
    for (u, sid), g in df.groupby(["user_id", "session_id"], sort=True):
        sc = g["score"].to_numpy()
        label = bool(g["genuine"].iloc[0])
        fused = [fuse_scores(sc)] if protocol.name == "session" else _windows(sc, protocol.k)
        rows.extend((int(u), sid, label, float(v)) for v in fused)
    out = pd.DataFrame(rows, columns=["user_id", "session_id", "genuine", "score"])
    gm = out["genuine"].to_numpy(dtype=bool)
    s = ScoreSet(out["score"].to_numpy()[gm], out["score"].to_numpy()[~gm])
    rep, roc = evaluate_scores(s, scope="global", scenario="B", protocol=protocol)
    return ScenarioBResult(str(protocol), rep, roc, session_scores=out)


def smoothing_experiment(sessions, cfgs, *, seed=0, num_trees=100, n_jobs=1, segmented=None):
    """Session-protocol scenario B once per resampling configuration."""
    if segmented is None:
        segmented = segment_sessions(sessions)
    results = {}
    for cfg in cfgs:
        df = feature_table(None, cfg, segmented=segmented)
        train_df = df[df["part"] == "training"]
        test_df = df[df["part"] == "test"]
        key = f"{cfg.method.value}@{cfg.frequency:g}Hz"
        results[key] = scenario_b(train_df, test_df, "session", seed=seed, num_trees=num_trees, n_jobs=n_jobs)
    return results
