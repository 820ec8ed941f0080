"""End-to-end run on a small generated corpus; needs no downloads.

    python scripts/synthetic_demo.py --out /tmp/demo
"""

import argparse
import tempfile

from mousedyn.evaluation import scenario_a_action, scenario_b, train_user_models
from mousedyn.ingest import load_corpus
from mousedyn.pipeline import feature_table, segment_sessions
from mousedyn.segmentation import action_type_histogram
from mousedyn.synthetic import make_corpus


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--out", help="where to write the corpus (default: a temp dir)")
    p.add_argument("--users", type=int, nargs="+", default=[7, 9, 12, 15])
    p.add_argument("--trees", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()

    root = args.out or tempfile.mkdtemp(prefix="mousedyn-demo-")
    labels = make_corpus(root, users=tuple(args.users), seed=args.seed)
    sessions = load_corpus(root, labels)
    seg = segment_sessions(sessions)
    hist = action_type_histogram([a for _, acts in seg for a in acts])
    print("actions:", {k: v["count"] for k, v in hist.items()})

    df = feature_table(None, segmented=seg)
    train_df, test_df = df[df["part"] == "training"], df[df["part"] == "test"]
    a = scenario_a_action(train_df, folds=5, seed=args.seed, num_trees=args.trees)
    print(f"scenario A action: mean AUC {a.mean.auc:.4f}")
    models = train_user_models(train_df, seed=args.seed, num_trees=args.trees)
    for proto in ("action", "set:10", "session"):
        r = scenario_b(train_df, test_df, proto, models=models).report
        print(f"scenario B {proto:>8}: AUC {r.auc:.4f}  EER {r.eer:.4f}")


if __name__ == "__main__":
    main()
