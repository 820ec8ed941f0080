import numpy as np
import pandas as pd
import pytest

from mousedyn.evaluation import (
    EmptyTestSet,
    InsufficientData,
    NoModelForUser,
    Protocol,
    cross_validated_scores,
    scenario_a_action,
    scenario_a_action_set,
    scenario_a_by_type,
    scenario_b,
    smoothing_experiment,
    stratified_folds,
    train_user_models,
)
from mousedyn.features import FEATURE_NAMES
from mousedyn.ingest import load_corpus
from mousedyn.metrics import EmptyScoreList, compute_roc
from mousedyn.pipeline import feature_table, segment_sessions
from mousedyn.resampling import ResampleConfig


def random_table(rng, users, n, shift=0.0, sessions=1):
    rows = []
    for ui, u in enumerate(users):
        X = rng.normal(size=(n, 39)) + shift * ui
        df = pd.DataFrame(X, columns=FEATURE_NAMES)
        df["type_of_action"] = rng.choice(["MM", "PC", "DD"], n)
        df["direction"] = rng.integers(1, 9, n)
        df["user_id"] = u
        df["session_id"] = [f"u{u}_s{i % sessions}" for i in range(n)]
        df["genuine"] = True
        rows.append(df)
    return pd.concat(rows, ignore_index=True)


@pytest.fixture(scope="module")
def corpus_tables(synthetic_corpus):
    root, labels = synthetic_corpus
    sessions = load_corpus(root, labels)
    seg = segment_sessions(sessions)
    df = feature_table(None, segmented=seg)
    return sessions, seg, df[df["part"] == "training"], df[df["part"] == "test"]


def test_protocol_parse():
    assert Protocol.parse("set:5") == Protocol("set", 5)
    assert str(Protocol.parse("Session")) == "session"
    with pytest.raises(ValueError):
        Protocol.parse("set:0")
    with pytest.raises(ValueError):
        Protocol.parse("everything")


def test_stratified_folds_balanced():
    y = np.r_[np.ones(37, int), np.zeros(23, int)]
    f = stratified_folds(y, 10, seed=0)
    for k in range(10):
        assert abs((f[y == 1] == k).sum() - 3.7) < 1 and abs((f[y == 0] == k).sum() - 2.3) < 1


def test_indistinguishable_users_auc_half():
    rng = np.random.default_rng(0)
    df = random_table(rng, [1, 2], 800)
    table = scenario_a_action(df, folds=10, seed=0, num_trees=25)
    for rep in table.users:
        assert abs(rep.auc - 0.5) <= 0.05


def test_scenario_a_separable_and_layout():
    rng = np.random.default_rng(1)
    df = random_table(rng, [3, 5, 8], 120, shift=1.5)
    table = scenario_a_action(df, folds=5, seed=0, num_trees=15)
    assert [r.user for r in table.users] == [3, 5, 8]
    assert table.mean.auc == pytest.approx(np.mean([r.auc for r in table.users]))
    assert table.std.acc == pytest.approx(np.std([r.acc for r in table.users]))
    assert table.mean.auc > 0.95
    frame = table.to_frame()
    assert list(frame["scope"]) == ["user"] * 3 + ["mean", "std"]
    # every held-out row scored exactly once
    cv = table.extra["cv"]
    assert sum(len(np.concatenate(cv.positives[u])) for u in cv.positives) == 360


def test_set_k1_equals_pooled_actions():
    rng = np.random.default_rng(2)
    df = random_table(rng, [1, 2, 3], 100, shift=0.3)
    cv = cross_validated_scores(df, folds=5, seed=3, num_trees=10)
    sets = scenario_a_action_set(cv=cv, k_range=[1, 2, 5])
    pooled = compute_roc(cv.pooled())
    assert sets[0] == (1, pooled.auc, pooled.eer)
    assert [k for k, *_ in sets] == [1, 2, 5]


def test_by_type_insufficient():
    rng = np.random.default_rng(3)
    df = random_table(rng, [1, 2], 40)
    df.loc[(df.user_id == 2) & (df.type_of_action == "DD"), "type_of_action"] = "PC"
    with pytest.raises(InsufficientData, match="user 2"):
        scenario_a_by_type(df, "DD", folds=10, num_trees=3)


def test_scenario_a_insufficient():
    rng = np.random.default_rng(4)
    with pytest.raises(InsufficientData):
        scenario_a_action(random_table(rng, [1, 2], 5), folds=10, num_trees=3)


def test_scenario_b_protocol_counts(corpus_tables):
    _, _, train_df, test_df = corpus_tables
    models = train_user_models(train_df, seed=0, num_trees=10)
    per_session = test_df.groupby(["user_id", "session_id"]).size()

    res = scenario_b(train_df, test_df, "session", models=models)
    assert len(res.session_scores) == len(per_session) == 12
    assert res.report.n_positive == 6 and res.report.n_negative == 6

    for k in (1, 3, 7):
        res = scenario_b(train_df, test_df, f"set:{k}", models=models)
        assert len(res.session_scores) == int((per_session // k).sum())
    # no session is long enough for a single window
    with pytest.raises(EmptyScoreList):
        scenario_b(train_df, test_df, f"set:{per_session.max() + 1}", models=models)

    act = scenario_b(train_df, test_df, "action", models=models)
    assert act.report.n_positive + act.report.n_negative == len(test_df)
    assert [r.user for r in act.table.users] == [7, 9, 12]


def test_scenario_b_set_of_one_is_action(corpus_tables):
    _, _, train_df, test_df = corpus_tables
    models = train_user_models(train_df, seed=0, num_trees=10)
    a = scenario_b(train_df, test_df, "action", models=models)
    s = scenario_b(train_df, test_df, "set:1", models=models)
    assert a.report.auc == s.report.auc and a.report.eer == s.report.eer


def test_scenario_b_errors(corpus_tables):
    _, _, train_df, test_df = corpus_tables
    models = train_user_models(train_df, seed=0, num_trees=3)
    with pytest.raises(EmptyTestSet):
        scenario_b(train_df, test_df.iloc[:0], "session", models=models)
    bad = test_df.copy()
    bad["user_id"] = 99
    with pytest.raises(NoModelForUser):
        scenario_b(train_df, bad, "session", models=models)


def test_smoothing_deterministic(corpus_tables):
    sessions, seg, *_ = corpus_tables
    cfgs = [ResampleConfig(20, "none"), ResampleConfig(20, "linear")]
    a = smoothing_experiment(None, cfgs, segmented=seg, num_trees=8, seed=5)
    b = smoothing_experiment(None, cfgs, segmented=seg, num_trees=8, seed=5)
    assert list(a) == ["none@20Hz", "linear@20Hz"]
    for key in a:
        assert a[key].report == b[key].report
