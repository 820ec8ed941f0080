"""Glue from sessions to feature tables, and the feature CSV format."""

from __future__ import annotations

import logging

import numpy as np
import pandas as pd

from .features import CATEGORICAL, FEATURE_NAMES, KIND_CODES, extract_features
from .gainratio import gain_ratio_ranking
from .ingest import Role
from .resampling import ResampleConfig, resample
from .segmentation import GAP_THRESHOLD, MIN_EVENTS, ActionKind, segment

log = logging.getLogger(__name__)

CSV_COLUMNS = list(FEATURE_NAMES) + ["user_id", "session_id", "genuine"]


def session_genuine(session) -> bool:
    return session.role is not Role.TEST_NEGATIVE


def segment_sessions(sessions, gap_threshold=GAP_THRESHOLD, min_events=MIN_EVENTS):
    """List of (session, actions) pairs."""
    return [(s, segment(s, gap_threshold, min_events)) for s in sessions]


def feature_table(
    sessions,
    resample_cfg: ResampleConfig | None = None,
    *,
    gap_threshold=GAP_THRESHOLD,
    min_events=MIN_EVENTS,
    segmented=None,
) -> pd.DataFrame:
    """One row per action with the 39 features plus user_id, session_id, genuine, part.

    Rows keep session order and, within a session, temporal order.
    """
    cfg = resample_cfg or ResampleConfig()
    if segmented is None:
        segmented = segment_sessions(sessions, gap_threshold, min_events)
    records = []
    for session, actions in segmented:
        genuine = session_genuine(session)
        part = "training" if session.role is Role.TRAINING else "test"
        for action in actions:
            act = resample(action, cfg)
            feats = extract_features(act, genuine=genuine)
            rec = feats.as_dict()
            rec["part"] = part
            records.append(rec)
    df = pd.DataFrame.from_records(records, columns=CSV_COLUMNS + ["part"])
    return df.astype({"user_id": int, "genuine": bool})


def feature_matrix(df: pd.DataFrame) -> np.ndarray:
    """Numeric matrix in schema order; action type encoded MM=0, PC=1, DD=2."""
    cols = []
    for name in FEATURE_NAMES:
        col = df[name]
        if name == "type_of_action":
            col = col.map({k.value: v for k, v in KIND_CODES.items()})
            if col.isna().any():
                raise ValueError("unknown action type in feature table")
        cols.append(col.to_numpy(dtype=float))
    return np.column_stack(cols) if cols else np.empty((len(df), 0))


def per_user_matrices(df: pd.DataFrame) -> dict[int, np.ndarray]:
    return {int(u): feature_matrix(g) for u, g in df.groupby("user_id", sort=True)}


def rank_features(df: pd.DataFrame) -> list[tuple[str, float]]:
    """Gain ratio of every feature about which user produced the action.

    The class is the user id over the pooled rows. A binary genuine/impostor
    label pooled across all users carries no signal: every user's rows are
    genuine in one balanced set and impostor in the others.
    """
    return gain_ratio_ranking(feature_matrix(df), df["user_id"].to_numpy(), FEATURE_NAMES, CATEGORICAL)


def write_features(df: pd.DataFrame, path) -> None:
    df[CSV_COLUMNS].to_csv(path, index=False, float_format="%.17g")


def read_features(path) -> pd.DataFrame:
    df = pd.read_csv(path, dtype={"session_id": str})
    missing = [c for c in CSV_COLUMNS if c not in df.columns]
    if missing:
        raise ValueError(f"{path}: missing columns {missing}")
    bad = set(df["type_of_action"]) - {k.value for k in ActionKind}
    if bad:
        raise ValueError(f"{path}: unknown action types {sorted(bad)}")
    return df


__all__ = [
    "CATEGORICAL",
    "CSV_COLUMNS",
    "feature_matrix",
    "feature_table",
    "per_user_matrices",
    "rank_features",
    "read_features",
    "segment_sessions",
    "write_features",
]
