"""Shared bits for the experiment scripts."""

import argparse
import json
import logging
from pathlib import Path

from mousedyn.ingest import load_corpus
from mousedyn.pipeline import feature_table, segment_sessions


def parser(description):
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--data-root", required=True, help="dataset root with training_files/ and test_files/")
    p.add_argument("--labels", help="labels CSV (filename,is_illegal)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trees", type=int, default=100)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--out", default="results")
    return p


def load(args):
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    sessions = load_corpus(args.data_root, args.labels, unlabeled="skip")
    seg = segment_sessions(sessions)
    df = feature_table(None, segmented=seg)
    return sessions, seg, df[df["part"] == "training"], df[df["part"] == "test"]


def save(out, name, obj):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    path = out / name
    if hasattr(obj, "to_csv"):
        obj.to_csv(path, index=False, float_format="%.6f")
    else:
        path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    print(f"wrote {path}")
